#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bicert {

// Everything a subcommand needs, filled in by the flag parser. Tests build
// it directly to drive commands without a process boundary.
struct ExperimentConfig {
    std::string instance = "ref1";    // "ref0", "ref1", or a path to an instance JSON
    bool has_gen = false;             // --gen m,n,seed,cond replaces --instance
    int gen_m = 0;
    int gen_n = 0;
    std::uint64_t gen_seed = 0;
    double gen_cond = 1.0;

    bool auto_steps = false;          // pick steps from the certified region
    double alpha = 0.0;               // explicit steps, used when auto_steps is false
    double beta = 0.0;

    long iters = 20000;               // iteration budget
    double target = 1e-6;             // accuracy target (compare)
    std::string out_dir = ".";
    bool force = false;               // run solve even when steps leave the certified region

    bool has_start_seed = false;      // seeded uniform [-2, 2] start
    std::uint64_t start_seed = 0;
    std::vector<double> start_omega;  // explicit start, overrides the seed
    std::vector<double> start_v;

    double mu_f_override = 0.0;       // replaces the derived mu_f when positive
};

// Exit codes: 0 success / feasible / all checks pass,
//             1 infeasible / rate check failed / audit violation,
//             2 usage error or refusal (bad flags, unreadable file,
//               uncertified steps without --force).
int cmd_certify(const ExperimentConfig& cfg);
int cmd_solve(const ExperimentConfig& cfg);
int cmd_compare(const ExperimentConfig& cfg);
int cmd_audit(const ExperimentConfig& cfg);
int cmd_gen(const ExperimentConfig& cfg);

// Full argv front end (subcommands certify | solve | compare | audit | gen).
int run_cli(int argc, const char* const* argv);

} // namespace bicert
