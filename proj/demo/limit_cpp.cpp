// One window of the Brownian limit process with mutations, plus the exact Pi_1(B_m) masses.
#include <cstdio>

#include "sptree/sptree.hpp"

using namespace sptree;

int main() {
    const double tau = 1.0, eps = 0.1;
    auto m = brownian_model(1.0, 0.5);
    Rng rng(7, "demo");
    auto cpp = sample_limit_cpp(m, tau, eps, rng);
    std::printf("atoms in [0,1]: %zu (mean %.3f)\n", cpp.atoms.size(), p_eps(m, eps, tau));
    for (const auto& a : cpp.atoms)
        std::printf("  t=%.4f  depth=%.4f  mutations=%zu\n", a.position, a.lineage.coalescence_depth, a.lineage.mutation_depths.size());
    double total = 0;
    for (int k = 0; k < 6; ++k) {
        double v = pi1_B_brownian(m, k, eps, tau);
        total += v;
        std::printf("Pi_1(B_%d) = %.6f\n", k, v);
    }
    std::printf("sum m<6 = %.6f of %.6f\n", total, p_eps(m, eps, tau));
}
