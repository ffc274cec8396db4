// Prints W(x) for a few models next to their closed forms.
#include <cmath>
#include <cstdio>

#include "sptree/sptree.hpp"

using namespace sptree;

int main() {
    auto brown = brownian_model();
    auto stable = stable_limit_model(1.5);
    auto ex = example1_model(100);
    std::printf("%6s  %12s %12s  %12s %12s  %12s %12s\n", "x", "brownian", "2x", "stable1.5", "x^.5/G(1.5)", "ex1 n=100",
                "2/n+2x");
    for (double x : num::linspace(0.1, 2.0, 8)) {
        std::printf("%6.3f  %12.8f %12.8f  %12.8f %12.8f  %12.8f %12.8f\n", x, scale_function(brown, x, ScaleMethod::Talbot),
                    2 * x, scale_function(stable, x, ScaleMethod::Talbot), std::sqrt(x) / std::tgamma(1.5),
                    scale_function(ex, x, ScaleMethod::Talbot), 0.02 + 2 * x);
    }
    std::printf("W_n(0) for n=100: %.17g (n/d_n = %.17g)\n", scale_function(ex, 0.0), 100.0 / 5000.0);
}
