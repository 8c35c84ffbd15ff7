#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace cart {

struct StageOptions {
    std::string config_path;
    std::string out_dir = "out";  // run directory shared by all stages
    std::optional<uint64_t> seed_override;
    std::optional<int> threads_override;
    bool quiet = false;
};

// Each stage reads upstream artifacts from subdirectories of out_dir and
// writes its own subdirectory plus a manifest. Errors surface as the
// exception types in error.hpp.
void run_synth(const StageOptions& options);
void run_train_baseline(const StageOptions& options);
void run_discover(const StageOptions& options);
void run_assess(const StageOptions& options);
void run_train_cart(const StageOptions& options);
void run_ensemble(const StageOptions& options);
void run_report(const StageOptions& options);

}  // namespace cart
