#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mobprof/online.hpp"
#include "mobprof/profile.hpp"

namespace mobprof {

inline constexpr std::string_view kVersion = "1.0.0";

/// Seed offset between consecutive trials. Object seeds are trial seed plus
/// object id, so the offset has to exceed any population size.
inline constexpr std::uint64_t kTrialSeedStride = 1'000'003;

/// Invalid experiment configuration; `problems` lists every violation found.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// A failure that aborts an experiment, tagged with the trial seed and the
/// object that triggered it (-1 when no single object is to blame).
class ExperimentFailure : public std::runtime_error {
public:
    ExperimentFailure(const std::string& what, std::uint64_t seed, int object_id);
    std::uint64_t seed() const noexcept { return seed_; }
    int object_id() const noexcept { return object_id_; }

private:
    std::uint64_t seed_;
    int object_id_;
};

struct OnlineSettings {
    int initial_count = 4;
    int delta = 3;
    double alpha = 0.2;
    double beta = 10.0;
    double feature_scale = 12.0;
    bool refit_standardization = false;
    int restarts = 20;
    int max_iterations = 100;
};

struct ExperimentConfig {
    std::string experiment;
    std::vector<ClassHyperParams> classes;
    std::optional<ClassHyperParams> new_class;
    std::size_t objects_per_class = 100;
    std::size_t trajectory_length = 100;
    double dt = 1.0;
    double update_rate = 1.0;
    double process_noise = 1.0;
    double measurement_noise = 1.0;
    MotionMode mode = MotionMode::planar;
    /// "map" (posterior mode under the class-mixture prior) or "ml".
    std::string estimator = "map";
    double fcm_fuzzifier = 2.0;
    std::vector<double> update_rates;
    std::vector<std::size_t> horizons;
    std::vector<double> noise_scales;
    std::size_t segment_length = 80;
    std::vector<std::size_t> segment_lengths;
    std::size_t segments = 10;
    OnlineSettings online{};
    std::vector<std::size_t> new_object_counts;
    /// Class-genesis false-alarm mode: the streamed objects come from the known
    /// classes instead of the new one.
    bool null_stream = false;
    std::optional<std::uint64_t> seed;
    std::size_t trials = 1;
    std::string output_dir = "results";
    unsigned workers = 0;

    SystemModel model() const;
    OnlineConfig online_config(std::uint64_t trial_seed) const;
};

struct ExperimentInfo {
    std::string name;
    std::string description;
};

const std::vector<ExperimentInfo>& experiment_catalog();

/// The three reference classes plus a fourth class (moderate pulse rate, turning the other
/// way) used as the known population of the class-genesis experiment.
std::vector<ClassHyperParams> genesis_base_classes();

/// The unseen class streamed in the class-genesis experiment: frequent
/// large-spread speed changes and steady hard turns.
ClassHyperParams genesis_new_class();

/// Defaults for one experiment (seed left unset).
ExperimentConfig default_config(const std::string& experiment);

/// Every rule violated by `config`; empty when it is valid.
std::vector<std::string> validate(const ExperimentConfig& config);

/// Overlays a JSON document on the defaults of `experiment` (or of the
/// document's "experiment" key when `experiment` is empty). Unknown keys,
/// wrong types and rule violations raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& experiment = "");
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& experiment = "");

nlohmann::json config_to_json(const ExperimentConfig& config);
nlohmann::json hyper_to_json(const ClassHyperParams& hyper);
ClassHyperParams hyper_from_json(const nlohmann::json& doc);

/// Rows are predicted classes, columns actual classes, both in `labels`
/// order. Predictions outside `labels` land in `unmatched`, one count per
/// actual class.
struct ConfusionMatrix {
    std::vector<int> labels;
    Eigen::MatrixXi counts;
    std::vector<int> unmatched;
    double csr = 0.0;

    int total() const;
};

/// `labels` defaults to the sorted distinct truths. A truth outside `labels`
/// is an error.
ConfusionMatrix evaluate_confusion(std::span<const int> predictions, std::span<const int> truths,
                                   std::span<const int> labels = {});

struct CsvTable {
    std::string file_name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct ExperimentResult {
    nlohmann::json metrics;
    std::vector<CsvTable> tables;
};

/// Runs a validated configuration. Throws ConfigError or ExperimentFailure.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// results.json (config, metrics, seed, version) plus one CSV per table.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                   const std::filesystem::path& directory);

/// Sum of squared state errors over the sum of squared true states.
double state_mse_ratio(std::span<const StateVector> truth, std::span<const StateVector> estimate);

/// |Psi - Psi_hat|^2 / |Psi|^2 over the active channels of every true class,
/// each matched to the registry class holding most of its members (ties to
/// the first such class).
double hyper_mse(std::span<const ClassHyperParams> truth, const ClassRegistry& registry,
                 const std::map<int, int>& true_class_of, MotionMode mode);

}  // namespace mobprof
