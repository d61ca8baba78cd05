// Monte-Carlo calibration of the watermark detector thresholds. The output
// is frozen into tests/fixtures/watermark_thresholds.txt and the library
// defaults.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "gridloop/agc.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Calibrate watermark detector thresholds from no-attack trials"};
    std::uint64_t seed_begin = 1000;
    std::size_t count = 1000;
    double tail = 0.005;
    std::string out;
    app.add_option("--seed-begin", seed_begin, "first trial seed");
    app.add_option("--count", count, "number of trials");
    app.add_option("--tail", tail, "per-statistic tail probability");
    app.add_option("--out", out, "fixture file to write");
    CLI11_PARSE(app, argc, argv);

    const gridloop::agc::TrialSpec spec;
    const auto th = gridloop::agc::calibrate_thresholds(spec, seed_begin, count, tail);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "# no-attack trials: seeds %llu..%llu, tail %.4g per statistic\ncorr %.4f\nvar %.4f\n",
                  static_cast<unsigned long long>(seed_begin),
                  static_cast<unsigned long long>(seed_begin + count - 1), tail, th.corr, th.var);
    std::cout << buf;
    if (!out.empty()) std::ofstream(out) << buf;
    return 0;
}
