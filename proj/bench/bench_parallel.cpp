// Serial reference loops against the OpenMP kernels on the two heaviest workloads.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "actangle/catalog.hpp"
#include "actangle/verify.hpp"

using namespace actangle;

namespace {

double best_of(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-28s serial %8.3f s   parallel %8.3f s   speedup %5.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 3;
    std::printf("threads available: %d\n", thread_count());

    const CatalogEntry sho2 = catalog_get("sho2");
    LatticeSearch search;
    search.s_max = 10.0;
    const auto scan = [&](Execution exec) {
        return best_of(reps, [&] { scan_returns(sho2.system, sho2.seed, search, 0.2, IntegratorOptions{}, exec); });
    };
    report("scan_returns (sho2, 10)", scan(Execution::serial), scan(Execution::parallel));

    const CatalogEntry cyl = catalog_get("cylinder");
    ChartOptions opts;
    opts.search.s_max = 12.0;
    const Chart chart = Chart::build(cyl.system, cyl.box, cyl.seed, opts);
    const auto samples = sample_chart(chart, 64, 1, 1.0);
    const auto verify = [&](Execution exec) {
        return best_of(reps, [&] { verify_canonical(chart, samples, 1e-5, exec); });
    };
    report("verify_canonical (64 pts)", verify(Execution::serial), verify(Execution::parallel));
    return 0;
}
