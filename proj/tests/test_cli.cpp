#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

std::string cart_bin() {
    const char* bin = std::getenv("CART_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "CART_BIN must point at the cart executable");
    return bin;
}

RunResult run(const std::string& args) {
    const std::string cmd = cart_bin() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 4096> buf{};
    size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        r.output.append(buf.data(), n);
    }
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch_dir() {
    const auto dir = fs::temp_directory_path() / "cart_cli_test";
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const auto path = scratch_dir() / name;
    std::ofstream out(path);
    out << text;
    return path;
}

// small enough that the full pipeline stays in the low seconds
const char* kSmokeToml =
    "seed = 7\n"
    "threads = 1\n"
    "[mixture]\n"
    "alpha = 0.85\n"
    "input_dim = 6\n"
    "n_head_clusters = 2\n"
    "n_tail_clusters = 2\n"
    "[synth]\n"
    "n_train = 400\n"
    "n_eval_head = 100\n"
    "n_eval_tail = 100\n"
    "[net]\n"
    "hidden = [12, 6]\n"
    "[train]\n"
    "learning_rate = 0.02\n"
    "epochs = 6\n"
    "batch_size = 32\n"
    "[discover]\n"
    "coherence_threshold = 0.05\n"
    "[vuln]\n"
    "sens_steps = 8\n"
    "sens_restarts = 2\n"
    "sens_max_examples = 8\n"
    "neighborhood_m = 4\n"
    "[cart]\n"
    "augment_candidates = 8\n"
    "augment_per_epoch = 16\n"
    "[ensemble]\n"
    "members = 2\n"
    "iterations = 300\n"
    "calibration_n = 60\n";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("--version prints the tool version and exits cleanly") {
    const RunResult r = run("--version");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("0.1.0") != std::string::npos);
}

TEST_CASE("the full pipeline runs end to end and is rerun-stable") {
    const auto config = write_file("smoke.toml", kSmokeToml);
    const auto out = scratch_dir() / "run";
    fs::remove_all(out);
    const std::string common = "--config " + config.string() + " --out " + out.string();

    for (const char* stage :
         {"synth", "train-baseline", "discover", "assess", "train-cart", "ensemble", "report"}) {
        const RunResult r = run(std::string(stage) + " " + common);
        CAPTURE(stage);
        CAPTURE(r.output);
        REQUIRE(r.exit_code == 0);
    }

    for (const char* artifact :
         {"data/train.jsonl", "data/eval_head.jsonl", "data/eval_tail.jsonl",
          "baseline/model.json", "baseline/history.csv", "discover/circuits.json",
          "discover/discovery.json", "assess/vulnerability.json", "assess/vulnerability.csv",
          "cart/model.json", "cart/selected.json", "ensemble/ensemble.json",
          "report/report.json"}) {
        CAPTURE(artifact);
        CHECK(fs::exists(out / artifact));
    }

    // resampling with the same config and seed must reproduce the bytes
    const std::string before = read_file(out / "data" / "train.jsonl");
    const RunResult again = run("synth " + common);
    REQUIRE(again.exit_code == 0);
    CHECK(read_file(out / "data" / "train.jsonl") == before);

    // progress lines name each stage; --quiet drops them
    const RunResult loud = run("synth " + common);
    CHECK(loud.output.find("synth") != std::string::npos);
    const RunResult quiet = run("synth " + common + " --quiet");
    CHECK(quiet.exit_code == 0);
    CHECK(quiet.output.empty());
}

TEST_CASE("config mistakes exit with code 2 and name the field") {
    const auto bad = write_file("bad_alpha.toml", "[mixture]\nalpha = 1.5\n");
    const auto out = scratch_dir() / "run_bad";
    RunResult r = run("synth --config " + bad.string() + " --out " + out.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("config error:") != std::string::npos);
    CHECK(r.output.find("mixture.alpha") != std::string::npos);

    const auto typo = write_file("typo.toml", "[mixture]\nalphaa = 0.5\n");
    r = run("synth --config " + typo.string() + " --out " + out.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("unknown config key: mixture.alphaa") != std::string::npos);
}

TEST_CASE("a missing upstream artifact exits with code 3 and says what to run") {
    const auto config = write_file("smoke2.toml", kSmokeToml);
    const auto out = scratch_dir() / "run_missing";
    fs::remove_all(out);
    const RunResult r =
        run("discover --config " + config.string() + " --out " + out.string());
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("missing artifact") != std::string::npos);
    CHECK(r.output.find("model.json") != std::string::npos);
    CHECK(r.output.find("upstream") != std::string::npos);
}

TEST_CASE("a corrupt artifact schema exits with code 4") {
    const auto config = write_file("smoke3.toml", kSmokeToml);
    const auto out = scratch_dir() / "run_corrupt";
    fs::remove_all(out);
    const std::string common = "--config " + config.string() + " --out " + out.string();
    REQUIRE(run("synth " + common).exit_code == 0);
    REQUIRE(run("train-baseline " + common).exit_code == 0);

    const auto model = out / "baseline" / "model.json";
    std::string text = read_file(model);
    const std::string needle = "\"schema_version\": 1";
    const size_t pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, needle.size(), "\"schema_version\": 99");
    std::ofstream(model, std::ios::binary) << text;

    const RunResult r = run("discover " + common);
    CHECK(r.exit_code == 4);
    CHECK(r.output.find("schema error:") != std::string::npos);
}

TEST_CASE("the seed flag overrides the config seed") {
    const auto config = write_file("smoke4.toml", kSmokeToml);
    const auto out_a = scratch_dir() / "run_seed_a";
    const auto out_b = scratch_dir() / "run_seed_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    REQUIRE(run("synth --config " + config.string() + " --out " + out_a.string() +
                " --seed 99")
                .exit_code == 0);
    REQUIRE(run("synth --config " + config.string() + " --out " + out_b.string())
                .exit_code == 0);
    CHECK(read_file(out_a / "data" / "train.jsonl") !=
          read_file(out_b / "data" / "train.jsonl"));
}
