// SPDX-License-Identifier: Apache-2.0
//
// smsim: command-line front end for the SM-MIMO uplink simulator.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "smsim/harness.hpp"
#include "smsim/selftest.hpp"

#ifdef SMSIM_WITH_ACCEPTANCE
#include "acceptance/criteria.hpp"
#endif

namespace {

int run_command(const std::string& config_path, const std::optional<std::string>& snr, const std::optional<long long>& trials,
                const std::optional<std::uint64_t>& seed, const std::optional<std::string>& detectors,
                const std::optional<std::string>& out_path, unsigned threads)
{
    smsim::SimConfig cfg = smsim::load_config(config_path);
    if (snr) smsim::set_config_value(cfg, "snr_grid_db", *snr);
    if (trials) cfg.trials = *trials;
    if (seed) cfg.seed = *seed;
    if (detectors) smsim::set_config_value(cfg, "detectors", *detectors);
    cfg.validate();

    const auto records = smsim::run_sweep(cfg, threads);
    for (const auto& r : records)
        if (!r.skip_reason.empty())
            std::cerr << "note: " << r.detector << " at " << r.snr_db << " dB skipped "
                      << (r.trials == 0 ? "all trials" : "some trials") << ": " << r.skip_reason << '\n';

    if (out_path) smsim::emit_csv(records, std::filesystem::path(*out_path));
    else smsim::emit_csv(records, std::cout);
    return 0;
}

int selftest_command()
{
    bool ok = true;
    for (const auto& r : smsim::run_selftest()) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
        if (!r.passed) std::cout << " -- " << r.detail;
        std::cout << '\n';
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-user spatial-modulation MIMO uplink link simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a BER sweep and write CSV results");
    std::string config_path;
    std::optional<std::string> snr, detectors, out_path;
    std::optional<long long> trials;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    run->add_option("--config", config_path, "Configuration file (key = value lines)")->required()->check(CLI::ExistingFile);
    run->add_option("--snr-db", snr, "SNR grid: start:step:stop or comma list");
    run->add_option("--trials", trials, "Trials per SNR point");
    run->add_option("--seed", seed, "Base seed");
    run->add_option("--out", out_path, "Output CSV path (default: stdout)");
    run->add_option("--detectors", detectors, "Comma list of gsp,sp,mmse,oracle,ml");
    run->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

    auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

#ifdef SMSIM_WITH_ACCEPTANCE
    auto* accept = app.add_subcommand("acceptance", "Run the acceptance criteria");
    std::vector<int> only;
    accept->add_option("--criterion", only, "Run only these criterion numbers");
#endif

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return run_command(config_path, snr, trials, seed, detectors, out_path, threads);
        if (*selftest) return selftest_command();
#ifdef SMSIM_WITH_ACCEPTANCE
        if (*accept) return smsim::acceptance::run_and_report(only, "/proc/self/exe", std::cout) ? 0 : 1;
#endif
    } catch (const std::exception& e) {
        std::cerr << "smsim: error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
