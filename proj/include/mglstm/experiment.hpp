#pragma once

// End-to-end experiment driver: data generation, training of one model per
// noise level, diagnostics and figure-data export, with a manifest that makes
// every stage resumable.

#include "mglstm/diagnostics.hpp"
#include "mglstm/mackey_glass.hpp"
#include "mglstm/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mglstm {

struct ExperimentConfig {
    MgConfig mg;
    std::size_t n_train = 20000;  ///< samples used for training
    std::size_t n_test = 10000;   ///< held-out samples that follow the training window
    std::vector<double> sigmas = kCanonicalSigmas;
    std::vector<double> eval_sigmas = kCanonicalSigmas;
    TrainConfig train;
    long checkpoint_every = 0;
    ImpulseSettings impulse;
    std::size_t washout = 150;  ///< leading predictions excluded from NRMSE and alpha
    std::filesystem::path output_dir = "experiment";
    std::uint64_t global_seed = 20190101;
    int jobs = 0;  ///< parallel training runs; 0 = hardware concurrency

    /// Throws ConfigError.
    void validate() const;
    /// Flat `[section]` / `key = value` text. Parsing it back yields the same
    /// config, and its hash identifies the run.
    std::string to_text() const;
    /// MgConfig with t_end covering n_train + n_test samples.
    MgConfig mg_config() const;
    TrainConfig train_config(double sigma) const;
};

/// `desk` (N=32, minutes) or `paper` (N=128, hours).
ExperimentConfig preset(std::string_view name);

/// Overlay `[section] key = value` settings onto `base`. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base);

std::string hash_hex(std::string_view text);

struct StageRecord {
    std::string name;
    bool skipped = false;
    double wall_seconds = 0.0;
};

/// Directory layout under output_dir: data/, models/, results/, manifest.json.
class Pipeline {
public:
    explicit Pipeline(ExperimentConfig config, std::ostream* log = nullptr);

    const ExperimentConfig& config() const { return config_; }

    std::filesystem::path data_dir() const;
    std::filesystem::path models_dir() const;
    std::filesystem::path results_dir() const;
    std::filesystem::path manifest_path() const;
    std::filesystem::path clean_data_path() const;
    std::filesystem::path noisy_data_path(double sigma) const;
    std::filesystem::path model_dir(double sigma) const;
    std::filesystem::path model_path(double sigma) const;

    void generate();
    /// Train every configured noise level, or only `sigma`.
    void train(std::optional<double> sigma = std::nullopt);
    void evaluate();
    void alpha();
    void sweep();
    void impulse();
    void report();
    /// All stages in order.
    void run_all();

    const std::vector<StageRecord>& stages() const { return records_; }

    /// Trajectory and models as stored on disk.
    Trajectory load_test_trajectory() const;
    std::vector<Model> load_models() const;

private:
    template <class Fn>
    void run_stage(const std::string& key, const std::string& stage_hash, const std::vector<std::filesystem::path>& outputs,
                   std::uint64_t seed, Fn&& body);
    void say(const std::string& line) const;
    std::string generate_hash() const;
    std::string train_hash(double sigma) const;
    std::string diagnostics_hash() const;
    void require_models() const;

    ExperimentConfig config_;
    std::ostream* log_;
    std::vector<StageRecord> records_;
};

/// Load a model from a file or from a model directory containing model.txt.
Model load_model_path(const std::filesystem::path& path);

/// CSV writers shared by the pipeline and the CLI.
void write_alpha_row_header(std::ostream& out);
void write_alpha_row(std::ostream& out, double sigma, const AlphaResult& a);

}  // namespace mglstm
