// Simulates the coalescent point process of the n=100 example and summarises depths and mutations.
#include <cstdio>

#include "sptree/sptree.hpp"

using namespace sptree;

int main() {
    const double n = 100, tau = 1.0, eps = 0.1;
    auto m = example1_model(n, MutationFunction::constant(1.0 / n));
    auto cpp = simulate_marked_cpp(m, RescalingScheme{n, n * n / 2}, tau, 2001, 42);
    std::size_t deep = 0, muts = 0;
    for (const auto& a : cpp.atoms) {
        deep += a.lineage.coalescence_depth > eps;
        muts += a.lineage.mutation_depths.size();
    }
    std::printf("lineages: %zu\n", cpp.atoms.size());
    std::printf("depth > %.2g: %zu (expected fraction %.4f, observed %.4f)\n", eps, deep, p_eps(m, eps, tau) * n / (n * n / 2),
                static_cast<double>(deep) / cpp.atoms.size());
    std::printf("mutations on lineages: %zu\n", muts);
    std::printf("first atoms:\n");
    for (std::size_t i = 0; i < 5 && i < cpp.atoms.size(); ++i) {
        const auto& a = cpp.atoms[i];
        std::printf("  t=%.4f  depth=%.6f  mutations=%zu\n", a.position, a.lineage.coalescence_depth, a.lineage.mutation_depths.size());
    }
}
