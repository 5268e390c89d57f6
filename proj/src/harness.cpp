#include "mobprof/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mobprof/baselines.hpp"
#include "mobprof/classifier.hpp"
#include "mobprof/filter.hpp"
#include "mobprof/format.hpp"
#include "mobprof/parallel.hpp"
#include "mobprof/profiler.hpp"
#include "mobprof/trajgen.hpp"

namespace mobprof {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument("invalid configuration: " + join(problems, "; ")), problems_(std::move(problems)) {}

ExperimentFailure::ExperimentFailure(const std::string& what, std::uint64_t seed, int object_id)
    : std::runtime_error(what + " (seed " + std::to_string(seed) + ", object " + std::to_string(object_id) + ")"),
      seed_(seed),
      object_id_(object_id) {}

SystemModel ExperimentConfig::model() const { return build_system(dt, process_noise, measurement_noise); }

OnlineConfig ExperimentConfig::online_config(std::uint64_t trial_seed) const {
    OnlineConfig c;
    c.model = model();
    c.profiler.mode = mode;
    c.cluster.delta = online.delta;
    c.cluster.alpha = online.alpha;
    c.cluster.beta = online.beta;
    c.cluster.restarts = online.restarts;
    c.cluster.max_iterations = online.max_iterations;
    c.initial_count = online.initial_count;
    c.feature_scale = online.feature_scale;
    c.refit_standardization = online.refit_standardization;
    c.seed = trial_seed;
    c.workers = 1;
    return c;
}

const std::vector<ExperimentInfo>& experiment_catalog() {
    static const std::vector<ExperimentInfo> catalog{
        {"filter_accuracy", "state-estimation MSE ratio per class (r = 1)"},
        {"table2", "confusion matrix and CSR of the full profiling pipeline"},
        {"table3", "pipeline CSR against direct K-means and FCM on the estimated force sequences"},
        {"fig8", "prediction error versus measurement update rate and horizon"},
        {"fig9", "CSR versus measurement noise scale (SNR sweep)"},
        {"fig10", "online hyper-parameter MSE versus segments received"},
        {"fig11", "probability of recognizing a new class versus objects received"},
    };
    return catalog;
}

std::vector<ClassHyperParams> genesis_base_classes() {
    std::vector<ClassHyperParams> out = reference_classes();
    ClassHyperParams h;
    h.class_id = 4;
    h[Channel::xy] = {10.0, 20.0, 5.0, 1.0, 1.0, 5.0};
    h[Channel::theta] = {10.0, 20.0, 5.0, 1.0, -0.5, 5.0};
    h[Channel::z] = {10.0, 20.0, 5.0, 1.0, 0.0, 5.0};
    out.push_back(h);
    return out;
}

ClassHyperParams genesis_new_class() {
    ClassHyperParams h;
    h.class_id = 5;
    h[Channel::xy] = {20.0, 5.0, 10.0, 100.0, 0.0, 5.0};
    h[Channel::theta] = {20.0, 5.0, 10.0, 0.1, -1.5, 5.0};
    h[Channel::z] = {20.0, 5.0, 10.0, 100.0, 0.0, 5.0};
    return h;
}

ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    c.classes = reference_classes();
    if (experiment == "filter_accuracy") {
        c.objects_per_class = 50;
    } else if (experiment == "table2" || experiment == "table3") {
        c.trials = 5;
    } else if (experiment == "fig8") {
        c.trials = 100;
        c.update_rates = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        c.horizons = {1, 5, 10};
    } else if (experiment == "fig9") {
        c.noise_scales = {0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    } else if (experiment == "fig10") {
        c.trials = 10;
        c.segment_lengths = {20, 40, 60, 80};
        c.segments = 10;
    } else if (experiment == "fig11") {
        c.trials = 100;
        c.classes = genesis_base_classes();
        c.new_class = genesis_new_class();
        for (std::size_t n = 0; n <= 60; n += 4) c.new_object_counts.push_back(n);
        c.new_object_counts.push_back(44);
        c.new_object_counts.push_back(55);
        std::sort(c.new_object_counts.begin(), c.new_object_counts.end());
    }
    return c;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
    std::vector<std::string> bad;
    const auto& catalog = experiment_catalog();
    const bool known = std::any_of(catalog.begin(), catalog.end(),
                                   [&](const ExperimentInfo& e) { return e.name == c.experiment; });
    if (!known) bad.push_back("experiment: unknown name '" + c.experiment + "'");
    if (!c.seed) bad.push_back("seed: required (config key 'seed' or --seed)");
    if (c.classes.empty()) bad.push_back("classes: at least one class required");
    std::set<int> ids;
    for (const ClassHyperParams& h : c.classes) {
        try {
            h.validate();
        } catch (const std::exception& e) {
            bad.push_back("classes: class " + std::to_string(h.class_id) + ": " + e.what());
        }
        if (h.class_id < 1) bad.push_back("classes: class ids must be >= 1");
        if (!ids.insert(h.class_id).second) bad.push_back("classes: duplicate class id " + std::to_string(h.class_id));
    }
    if (c.new_class) {
        try {
            c.new_class->validate();
        } catch (const std::exception& e) {
            bad.push_back(std::string("new_class: ") + e.what());
        }
        if (ids.count(c.new_class->class_id)) bad.push_back("new_class: class id clashes with a known class");
    }
    const std::size_t min_length = kMinFitSamples + 3;
    if (c.objects_per_class < 1) bad.push_back("objects_per_class: must be >= 1");
    if (c.trajectory_length < min_length) {
        bad.push_back("trajectory_length: must be >= " + std::to_string(min_length));
    }
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) bad.push_back("dt: must be > 0");
    if (!(c.update_rate > 0.0 && c.update_rate <= 1.0)) bad.push_back("update_rate: must lie in (0, 1]");
    if (!(c.process_noise > 0.0) || !std::isfinite(c.process_noise)) bad.push_back("process_noise: must be > 0");
    if (!(c.measurement_noise > 0.0) || !std::isfinite(c.measurement_noise)) {
        bad.push_back("measurement_noise: must be > 0");
    }
    if (c.estimator != "map" && c.estimator != "ml") bad.push_back("estimator: must be 'map' or 'ml'");
    if (!(c.fcm_fuzzifier > 1.0)) bad.push_back("fcm_fuzzifier: must be > 1");
    for (double r : c.update_rates) {
        if (!(r > 0.0 && r <= 1.0)) bad.push_back("update_rates: every rate must lie in (0, 1]");
    }
    for (std::size_t h : c.horizons) {
        if (h < 1) bad.push_back("horizons: every horizon must be >= 1");
    }
    for (double q : c.noise_scales) {
        if (!(q > 0.0) || !std::isfinite(q)) bad.push_back("noise_scales: every scale must be > 0");
    }
    if (c.segment_length < min_length) bad.push_back("segment_length: must be >= " + std::to_string(min_length));
    for (std::size_t l : c.segment_lengths) {
        if (l < min_length) bad.push_back("segment_lengths: every length must be >= " + std::to_string(min_length));
    }
    if (c.segments < 1) bad.push_back("segments: must be >= 1");
    const OnlineSettings& o = c.online;
    if (o.initial_count < 1) bad.push_back("online.initial_count: must be >= 1");
    if (o.delta < 0) bad.push_back("online.delta: must be >= 0");
    if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) bad.push_back("online.alpha: must lie in [0, 1]");
    if (!(o.beta >= 0.0)) bad.push_back("online.beta: must be >= 0");
    if (!(o.feature_scale > 0.0)) bad.push_back("online.feature_scale: must be > 0");
    if (o.restarts < 1) bad.push_back("online.restarts: must be >= 1");
    if (o.max_iterations < 1) bad.push_back("online.max_iterations: must be >= 1");
    if (c.trials < 1) bad.push_back("trials: must be >= 1");
    if (c.output_dir.empty()) bad.push_back("output_dir: must not be empty");

    if (c.experiment == "fig8" && (c.update_rates.empty() || c.horizons.empty())) {
        bad.push_back("fig8: update_rates and horizons must not be empty");
    }
    if (c.experiment == "fig9" && c.noise_scales.empty()) bad.push_back("fig9: noise_scales must not be empty");
    if (c.experiment == "fig10" && c.segment_lengths.empty()) bad.push_back("fig10: segment_lengths must not be empty");
    if (c.experiment == "fig11") {
        if (c.new_object_counts.empty()) bad.push_back("fig11: new_object_counts must not be empty");
        if (!c.new_class && !c.null_stream) bad.push_back("fig11: new_class required unless null_stream is set");
    }
    if (c.experiment == "table3" && c.classes.size() < 2) bad.push_back("table3: baselines need at least 2 classes");
    return bad;
}

// ---------------------------------------------------------------- JSON I/O

namespace {

constexpr std::array<std::pair<Channel, const char*>, 3> kChannelKeys{
    {{Channel::xy, "xy"}, {Channel::z, "z"}, {Channel::theta, "theta"}}};

json channel_to_json(const ChannelHyper& h) {
    return {{"beta_a", h.beta_a},         {"beta_b", h.beta_b},         {"gamma_alpha", h.gamma_alpha},
            {"gamma_beta", h.gamma_beta}, {"normal_mean", h.normal_mean}, {"shrinkage", h.shrinkage}};
}

ChannelHyper channel_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError({where + ": expected an object"});
    static const std::set<std::string> keys{"beta_a", "beta_b", "gamma_alpha", "gamma_beta", "normal_mean",
                                            "shrinkage"};
    std::vector<std::string> bad;
    for (const auto& [k, v] : j.items()) {
        if (!keys.count(k)) bad.push_back(where + ": unknown key '" + k + "'");
        else if (!v.is_number()) bad.push_back(where + "." + k + ": expected a number");
    }
    for (const std::string& k : keys) {
        if (!j.contains(k)) bad.push_back(where + ": missing '" + k + "'");
    }
    if (!bad.empty()) throw ConfigError(bad);
    return {j["beta_a"].get<double>(),     j["beta_b"].get<double>(),      j["gamma_alpha"].get<double>(),
            j["gamma_beta"].get<double>(), j["normal_mean"].get<double>(), j["shrinkage"].get<double>()};
}

// Reads config values into `out`, collecting type errors instead of stopping
// at the first one.
class Reader {
public:
    Reader(const json& doc, std::vector<std::string>& errors) : doc_(doc), errors_(errors) {}

    template <typename T>
    void number(const char* key, T& out) {
        if (!doc_.contains(key)) return;
        const json& v = doc_[key];
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) return fail(key, "expected an integer");
            if (std::is_unsigned_v<T> && v.get<long long>() < 0) return fail(key, "must not be negative");
            out = v.get<T>();
        } else {
            if (!v.is_number()) return fail(key, "expected a number");
            out = v.get<T>();
        }
    }

    void boolean(const char* key, bool& out) {
        if (!doc_.contains(key)) return;
        if (!doc_[key].is_boolean()) return fail(key, "expected true or false");
        out = doc_[key].get<bool>();
    }

    void string(const char* key, std::string& out) {
        if (!doc_.contains(key)) return;
        if (!doc_[key].is_string()) return fail(key, "expected a string");
        out = doc_[key].get<std::string>();
    }

    template <typename T>
    void list(const char* key, std::vector<T>& out) {
        if (!doc_.contains(key)) return;
        const json& v = doc_[key];
        if (!v.is_array()) return fail(key, "expected an array");
        std::vector<T> values;
        for (const json& e : v) {
            if constexpr (std::is_integral_v<T>) {
                if (!e.is_number_integer() || e.get<long long>() < 0) return fail(key, "expected non-negative integers");
            } else {
                if (!e.is_number()) return fail(key, "expected numbers");
            }
            values.push_back(e.get<T>());
        }
        out = std::move(values);
    }

private:
    void fail(const char* key, const std::string& what) { errors_.push_back(std::string(key) + ": " + what); }

    const json& doc_;
    std::vector<std::string>& errors_;
};

}  // namespace

json hyper_to_json(const ClassHyperParams& hyper) {
    json j{{"class_id", hyper.class_id}};
    for (const auto& [c, key] : kChannelKeys) j[key] = channel_to_json(hyper[c]);
    return j;
}

ClassHyperParams hyper_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError({"class: expected an object"});
    std::vector<std::string> bad;
    for (const auto& [k, v] : doc.items()) {
        if (k != "class_id" && k != "xy" && k != "z" && k != "theta") bad.push_back("class: unknown key '" + k + "'");
    }
    if (!doc.contains("class_id") || !doc["class_id"].is_number_integer()) {
        bad.push_back("class: integer 'class_id' required");
    }
    if (!doc.contains("xy") || !doc.contains("theta")) bad.push_back("class: 'xy' and 'theta' channels required");
    if (!bad.empty()) throw ConfigError(bad);
    ClassHyperParams h;
    h.class_id = doc["class_id"].get<int>();
    const std::string where = "class " + std::to_string(h.class_id);
    h[Channel::xy] = channel_from_json(doc["xy"], where + ".xy");
    h[Channel::theta] = channel_from_json(doc["theta"], where + ".theta");
    if (doc.contains("z")) {
        h[Channel::z] = channel_from_json(doc["z"], where + ".z");
    } else {
        h[Channel::z] = h[Channel::xy];
        h[Channel::z].normal_mean = 0.0;
    }
    return h;
}

json config_to_json(const ExperimentConfig& c) {
    json classes = json::array();
    for (const ClassHyperParams& h : c.classes) classes.push_back(hyper_to_json(h));
    json j{
        {"experiment", c.experiment},
        {"classes", classes},
        {"objects_per_class", c.objects_per_class},
        {"trajectory_length", c.trajectory_length},
        {"dt", c.dt},
        {"update_rate", c.update_rate},
        {"process_noise", c.process_noise},
        {"measurement_noise", c.measurement_noise},
        {"mode", c.mode == MotionMode::planar ? "planar" : "spatial"},
        {"estimator", c.estimator},
        {"fcm_fuzzifier", c.fcm_fuzzifier},
        {"update_rates", c.update_rates},
        {"horizons", c.horizons},
        {"noise_scales", c.noise_scales},
        {"segment_length", c.segment_length},
        {"segment_lengths", c.segment_lengths},
        {"segments", c.segments},
        {"online",
         {{"initial_count", c.online.initial_count},
          {"delta", c.online.delta},
          {"alpha", c.online.alpha},
          {"beta", c.online.beta},
          {"feature_scale", c.online.feature_scale},
          {"refit_standardization", c.online.refit_standardization},
          {"restarts", c.online.restarts},
          {"max_iterations", c.online.max_iterations}}},
        {"new_object_counts", c.new_object_counts},
        {"null_stream", c.null_stream},
        {"trials", c.trials},
        {"output_dir", c.output_dir},
        {"workers", c.workers},
    };
    j["new_class"] = c.new_class ? hyper_to_json(*c.new_class) : json(nullptr);
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    return j;
}

ExperimentConfig parse_config(const json& doc, const std::string& experiment) {
    if (!doc.is_object()) throw ConfigError({"config: top level must be a JSON object"});
    std::vector<std::string> errors;
    std::string name = experiment;
    if (doc.contains("experiment")) {
        if (!doc["experiment"].is_string()) {
            errors.push_back("experiment: expected a string");
        } else if (name.empty()) {
            name = doc["experiment"].get<std::string>();
        } else if (doc["experiment"].get<std::string>() != name) {
            errors.push_back("experiment: config names '" + doc["experiment"].get<std::string>() +
                             "' but '" + name + "' was requested");
        }
    }
    if (name.empty()) errors.push_back("experiment: no experiment named");
    ExperimentConfig c = default_config(name);

    static const std::set<std::string> keys{
        "experiment",    "classes",          "objects_per_class", "trajectory_length", "dt",
        "update_rate",   "process_noise",    "measurement_noise", "mode",              "estimator",
        "fcm_fuzzifier", "update_rates",     "horizons",          "noise_scales",      "segment_length",
        "segment_lengths", "segments",       "online",            "new_class",         "new_object_counts",
        "null_stream",   "seed",             "trials",            "output_dir",        "workers"};
    for (const auto& [k, v] : doc.items()) {
        if (!keys.count(k)) errors.push_back("unknown key '" + k + "'");
    }

    Reader r(doc, errors);
    r.number("objects_per_class", c.objects_per_class);
    r.number("trajectory_length", c.trajectory_length);
    r.number("dt", c.dt);
    r.number("update_rate", c.update_rate);
    r.number("process_noise", c.process_noise);
    r.number("measurement_noise", c.measurement_noise);
    r.string("estimator", c.estimator);
    r.number("fcm_fuzzifier", c.fcm_fuzzifier);
    r.list("update_rates", c.update_rates);
    r.list("horizons", c.horizons);
    r.list("noise_scales", c.noise_scales);
    r.number("segment_length", c.segment_length);
    r.list("segment_lengths", c.segment_lengths);
    r.number("segments", c.segments);
    r.list("new_object_counts", c.new_object_counts);
    r.boolean("null_stream", c.null_stream);
    r.number("trials", c.trials);
    r.string("output_dir", c.output_dir);
    r.number("workers", c.workers);
    if (doc.contains("mode")) {
        const json& m = doc["mode"];
        if (m == "planar") c.mode = MotionMode::planar;
        else if (m == "spatial") c.mode = MotionMode::spatial;
        else errors.push_back("mode: must be 'planar' or 'spatial'");
    }
    if (doc.contains("seed") && !doc["seed"].is_null()) {
        if (doc["seed"].is_number_unsigned()) c.seed = doc["seed"].get<std::uint64_t>();
        else errors.push_back("seed: expected a non-negative integer");
    }
    if (doc.contains("online")) {
        const json& o = doc["online"];
        if (!o.is_object()) {
            errors.push_back("online: expected an object");
        } else {
            static const std::set<std::string> online_keys{"initial_count", "delta",    "alpha",
                                                           "beta",          "feature_scale", "refit_standardization",
                                                           "restarts",      "max_iterations"};
            for (const auto& [k, v] : o.items()) {
                if (!online_keys.count(k)) errors.push_back("online: unknown key '" + k + "'");
            }
            Reader ro(o, errors);
            ro.number("initial_count", c.online.initial_count);
            ro.number("delta", c.online.delta);
            ro.number("alpha", c.online.alpha);
            ro.number("beta", c.online.beta);
            ro.number("feature_scale", c.online.feature_scale);
            ro.boolean("refit_standardization", c.online.refit_standardization);
            ro.number("restarts", c.online.restarts);
            ro.number("max_iterations", c.online.max_iterations);
        }
    }
    try {
        if (doc.contains("classes")) {
            if (!doc["classes"].is_array()) throw ConfigError({"classes: expected an array"});
            c.classes.clear();
            for (const json& h : doc["classes"]) c.classes.push_back(hyper_from_json(h));
        }
        if (doc.contains("new_class")) {
            if (doc["new_class"].is_null()) c.new_class.reset();
            else c.new_class = hyper_from_json(doc["new_class"]);
        }
    } catch (const ConfigError& e) {
        errors.insert(errors.end(), e.problems().begin(), e.problems().end());
    }
    if (!errors.empty()) throw ConfigError(errors);
    if (std::vector<std::string> bad = validate(c); !bad.empty()) throw ConfigError(bad);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& experiment) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"config: cannot open '" + path.string() + "'"});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("config: not valid JSON: ") + e.what()});
    }
    return parse_config(doc, experiment);
}

// --------------------------------------------------------------- metrics

int ConfusionMatrix::total() const {
    int n = counts.sum();
    for (int u : unmatched) n += u;
    return n;
}

ConfusionMatrix evaluate_confusion(std::span<const int> predictions, std::span<const int> truths,
                                   std::span<const int> labels) {
    if (predictions.size() != truths.size()) {
        throw std::invalid_argument("evaluate_confusion: predictions and truths differ in length");
    }
    ConfusionMatrix m;
    if (labels.empty()) {
        const std::set<int> distinct(truths.begin(), truths.end());
        m.labels.assign(distinct.begin(), distinct.end());
    } else {
        m.labels.assign(labels.begin(), labels.end());
    }
    const auto index_of = [&](int label) -> std::optional<Eigen::Index> {
        const auto it = std::find(m.labels.begin(), m.labels.end(), label);
        if (it == m.labels.end()) return std::nullopt;
        return static_cast<Eigen::Index>(it - m.labels.begin());
    };
    const auto n = static_cast<Eigen::Index>(m.labels.size());
    m.counts = Eigen::MatrixXi::Zero(n, n);
    m.unmatched.assign(m.labels.size(), 0);
    int correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const auto actual = index_of(truths[i]);
        if (!actual) throw std::invalid_argument("evaluate_confusion: truth label outside the label set");
        if (const auto predicted = index_of(predictions[i])) {
            ++m.counts(*predicted, *actual);
            correct += *predicted == *actual;
        } else {
            ++m.unmatched[static_cast<std::size_t>(*actual)];
        }
    }
    m.csr = truths.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truths.size());
    return m;
}

double state_mse_ratio(std::span<const StateVector> truth, std::span<const StateVector> estimate) {
    if (truth.size() != estimate.size() || truth.empty()) {
        throw std::invalid_argument("state_mse_ratio: need equally long, non-empty sequences");
    }
    double err = 0.0;
    double power = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        err += (truth[i].stacked() - estimate[i].stacked()).squaredNorm();
        power += truth[i].stacked().squaredNorm();
    }
    if (!(power > 0.0)) throw std::invalid_argument("state_mse_ratio: true states are all zero");
    return err / power;
}

double hyper_mse(std::span<const ClassHyperParams> truth, const ClassRegistry& registry,
                 const std::map<int, int>& true_class_of, MotionMode mode) {
    if (registry.classes.empty()) throw std::invalid_argument("hyper_mse: empty registry");
    double num = 0.0;
    double den = 0.0;
    for (const ClassHyperParams& t : truth) {
        std::size_t best = 0;
        int best_hits = -1;
        for (std::size_t k = 0; k < registry.classes.size(); ++k) {
            int hits = 0;
            for (int id : registry.classes[k].members) {
                const auto it = true_class_of.find(id);
                hits += it != true_class_of.end() && it->second == t.class_id;
            }
            if (hits > best_hits) {
                best_hits = hits;
                best = k;
            }
        }
        const ClassHyperParams& e = registry.classes[best].hyper;
        for (Channel c : active_channels(mode)) {
            const ChannelHyper& a = t[c];
            const ChannelHyper& b = e[c];
            const std::array<double, 6> tv{a.beta_a, a.beta_b, a.gamma_alpha, a.gamma_beta, a.normal_mean, a.shrinkage};
            const std::array<double, 6> ev{b.beta_a, b.beta_b, b.gamma_alpha, b.gamma_beta, b.normal_mean, b.shrinkage};
            for (std::size_t i = 0; i < 6; ++i) {
                num += (tv[i] - ev[i]) * (tv[i] - ev[i]);
                den += tv[i] * tv[i];
            }
        }
    }
    return num / den;
}

// ------------------------------------------------------------ experiments

namespace {

std::uint64_t trial_seed(const ExperimentConfig& c, std::size_t trial) {
    return *c.seed + static_cast<std::uint64_t>(trial) * kTrialSeedStride;
}

std::string fmt(double v) { return format_double(v); }

template <typename T>
std::string fmt_int(T v) {
    return std::to_string(v);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

EstimatedTrajectory estimate(const SynthTrajectory& t, const SystemModel& model) {
    return filter_trajectory(t.observations, model, initial_guess_from(t.observations));
}

struct PipelineOutput {
    std::vector<std::optional<EstimatedTrajectory>> estimates;
    std::vector<int> predicted_map;
    std::vector<int> predicted_ml;
    std::vector<int> truth;
    std::vector<std::pair<int, std::string>> failures;
};

// Steps 1-3 for a whole population. Objects that fail are predicted as -1.
PipelineOutput run_pipeline(const std::vector<SynthTrajectory>& population, const ExperimentConfig& c,
                            const SystemModel& model, bool want_map, bool want_ml) {
    const std::size_t n = population.size();
    PipelineOutput out;
    out.estimates.resize(n);
    out.predicted_map.assign(n, -1);
    out.predicted_ml.assign(n, -1);
    std::vector<std::string> failure(n);
    ProfilerOptions options;
    options.mode = c.mode;
    parallel_for(
        n,
        [&](std::size_t i) {
            try {
                EstimatedTrajectory est = estimate(population[i], model);
                if (want_map) {
                    const MotionProfile p = extract_profile_map(est, c.classes, options).profile;
                    out.predicted_map[i] = classify(p, c.classes, std::nullopt, c.mode).best_class;
                }
                if (want_ml) {
                    const MotionProfile p = extract_profile(est, options);
                    out.predicted_ml[i] = classify(p, c.classes, std::nullopt, c.mode).best_class;
                }
                out.estimates[i] = std::move(est);
            } catch (const std::exception& e) {
                failure[i] = e.what();
            }
        },
        c.workers);
    for (std::size_t i = 0; i < n; ++i) {
        out.truth.push_back(population[i].true_class);
        if (!failure[i].empty()) out.failures.emplace_back(population[i].profile.object_id, failure[i]);
    }
    return out;
}

json failures_json(const std::vector<std::pair<int, std::string>>& failures, std::uint64_t seed) {
    json arr = json::array();
    for (const auto& [id, what] : failures) arr.push_back({{"seed", seed}, {"object_id", id}, {"error", what}});
    return arr;
}

json confusion_json(const ConfusionMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.counts.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index col = 0; col < m.counts.cols(); ++col) row.push_back(m.counts(r, col));
        rows.push_back(row);
    }
    return {{"labels", m.labels}, {"counts", rows}, {"unmatched", m.unmatched}, {"csr", m.csr}};
}

ExperimentResult filter_accuracy(const ExperimentConfig& c) {
    const SystemModel model = c.model();
    std::vector<std::vector<double>> ratios(c.classes.size());
    CsvTable table{"filter_accuracy.csv", {"trial", "object_id", "class_id", "mse_ratio"}, {}};
    for (std::size_t t = 0; t < c.trials; ++t) {
        const std::uint64_t seed = trial_seed(c, t);
        const auto population = generate_population(c.classes, c.objects_per_class, model, c.trajectory_length,
                                                    c.update_rate, seed, c.mode);
        std::vector<double> ratio(population.size());
        std::vector<std::string> failure(population.size());
        parallel_for(
            population.size(),
            [&](std::size_t i) {
                try {
                    const EstimatedTrajectory est = estimate(population[i], model);
                    std::vector<StateVector> truth;
                    for (const FilterState& s : est.filter_states) truth.push_back(population[i].states[s.timestep_index]);
                    ratio[i] = state_mse_ratio(truth, est.states);
                } catch (const std::exception& e) {
                    failure[i] = e.what();
                }
            },
            c.workers);
        for (std::size_t i = 0; i < population.size(); ++i) {
            if (!failure[i].empty()) throw ExperimentFailure(failure[i], seed, population[i].profile.object_id);
            const std::size_t k = i / c.objects_per_class;
            ratios[k].push_back(ratio[i]);
            table.rows.push_back({fmt_int(t), fmt_int(population[i].profile.object_id),
                                  fmt_int(population[i].true_class), fmt(ratio[i])});
        }
    }
    json per_class = json::array();
    std::vector<double> all;
    for (std::size_t k = 0; k < c.classes.size(); ++k) {
        per_class.push_back({{"class_id", c.classes[k].class_id},
                             {"mse_ratio_mean", mean_of(ratios[k])},
                             {"mse_ratio_max", *std::max_element(ratios[k].begin(), ratios[k].end())},
                             {"trajectories", ratios[k].size()}});
        all.insert(all.end(), ratios[k].begin(), ratios[k].end());
    }
    return {{{"per_class", per_class}, {"mse_ratio_mean", mean_of(all)}}, {table}};
}

ExperimentResult table2(const ExperimentConfig& c) {
    const SystemModel model = c.model();
    const bool map_primary = c.estimator == "map";
    std::vector<int> all_primary;
    std::vector<int> all_truth;
    std::vector<double> csr_primary;
    std::vector<double> csr_other;
    json failures = json::array();
    CsvTable trials{"table2_trials.csv", {"trial", "seed", "csr", map_primary ? "csr_ml" : "csr_map"}, {}};
    for (std::size_t t = 0; t < c.trials; ++t) {
        const std::uint64_t seed = trial_seed(c, t);
        const auto population = generate_population(c.classes, c.objects_per_class, model, c.trajectory_length,
                                                    c.update_rate, seed, c.mode);
        const PipelineOutput out = run_pipeline(population, c, model, true, true);
        const std::vector<int>& primary = map_primary ? out.predicted_map : out.predicted_ml;
        const std::vector<int>& other = map_primary ? out.predicted_ml : out.predicted_map;
        csr_primary.push_back(evaluate_confusion(primary, out.truth).csr);
        csr_other.push_back(evaluate_confusion(other, out.truth).csr);
        all_primary.insert(all_primary.end(), primary.begin(), primary.end());
        all_truth.insert(all_truth.end(), out.truth.begin(), out.truth.end());
        for (const json& f : failures_json(out.failures, seed)) failures.push_back(f);
        trials.rows.push_back({fmt_int(t), fmt_int(seed), fmt(csr_primary.back()), fmt(csr_other.back())});
    }
    std::vector<int> labels;
    for (const ClassHyperParams& h : c.classes) labels.push_back(h.class_id);
    std::sort(labels.begin(), labels.end());
    const ConfusionMatrix pooled = evaluate_confusion(all_primary, all_truth, labels);

    CsvTable confusion{"table2_confusion.csv", {"predicted"}, {}};
    for (int l : pooled.labels) confusion.header.push_back("actual_" + std::to_string(l));
    for (Eigen::Index r = 0; r < pooled.counts.rows(); ++r) {
        std::vector<std::string> row{fmt_int(pooled.labels[static_cast<std::size_t>(r)])};
        for (Eigen::Index col = 0; col < pooled.counts.cols(); ++col) row.push_back(fmt_int(pooled.counts(r, col)));
        confusion.rows.push_back(row);
    }
    std::vector<std::string> unmatched{"unmatched"};
    for (int u : pooled.unmatched) unmatched.push_back(fmt_int(u));
    confusion.rows.push_back(unmatched);

    json recall = json::object();
    for (std::size_t k = 0; k < pooled.labels.size(); ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        const int column_total = pooled.counts.col(col).sum() + pooled.unmatched[k];
        recall[std::to_string(pooled.labels[k])] =
            column_total > 0 ? static_cast<double>(pooled.counts(col, col)) / column_total : 0.0;
    }
    json metrics{{"estimator", c.estimator},
                 {"csr_mean", mean_of(csr_primary)},
                 {"csr_trials", csr_primary},
                 {"per_class_recall", recall},
                 {"confusion", confusion_json(pooled)},
                 {map_primary ? "csr_ml_mean" : "csr_map_mean", mean_of(csr_other)},
                 {map_primary ? "csr_ml_trials" : "csr_map_trials", csr_other},
                 {"failures", failures}};
    return {metrics, {confusion, trials}};
}

ExperimentResult table3(const ExperimentConfig& c) {
    const SystemModel model = c.model();
    const bool map_primary = c.estimator == "map";
    std::vector<double> jmpp;
    std::vector<double> km;
    std::vector<double> fcm;
    std::vector<double> km_z;
    std::vector<double> fcm_z;
    std::vector<double> km_s;
    std::vector<double> fcm_s;
    json failures = json::array();
    CsvTable table{"table3.csv", {"trial", "seed", "method", "csr"}, {}};
    for (std::size_t t = 0; t < c.trials; ++t) {
        const std::uint64_t seed = trial_seed(c, t);
        const auto population = generate_population(c.classes, c.objects_per_class, model, c.trajectory_length,
                                                    c.update_rate, seed, c.mode);
        const PipelineOutput out = run_pipeline(population, c, model, map_primary, !map_primary);
        jmpp.push_back(evaluate_confusion(map_primary ? out.predicted_map : out.predicted_ml, out.truth).csr);

        // The baselines see every object whose filter ran. The primary
        // baselines cluster the force sequences; the summary variants are
        // reported alongside.
        std::vector<EstimatedTrajectory> ok;
        std::vector<int> truth;
        for (std::size_t i = 0; i < population.size(); ++i) {
            if (!out.estimates[i]) continue;
            ok.push_back(*out.estimates[i]);
            truth.push_back(out.truth[i]);
        }
        if (ok.size() < c.classes.size()) throw ExperimentFailure("table3: too few objects survived filtering", seed, -1);
        const int k = static_cast<int>(c.classes.size());
        km.push_back(kmeans_direct(ok, truth, k, seed, c.mode).csr);
        fcm.push_back(fcm_direct(ok, truth, k, c.fcm_fuzzifier, seed, c.mode).csr);
        km_z.push_back(kmeans_direct(ok, truth, k, seed, c.mode, BaselineInput::standardized_summary).csr);
        fcm_z.push_back(fcm_direct(ok, truth, k, c.fcm_fuzzifier, seed, c.mode, BaselineInput::standardized_summary).csr);
        km_s.push_back(kmeans_direct(ok, truth, k, seed, c.mode, BaselineInput::summary).csr);
        fcm_s.push_back(fcm_direct(ok, truth, k, c.fcm_fuzzifier, seed, c.mode, BaselineInput::summary).csr);
        for (const json& f : failures_json(out.failures, seed)) failures.push_back(f);
        table.rows.push_back({fmt_int(t), fmt_int(seed), "jmpp", fmt(jmpp.back())});
        table.rows.push_back({fmt_int(t), fmt_int(seed), "kmeans_direct", fmt(km.back())});
        table.rows.push_back({fmt_int(t), fmt_int(seed), "fcm_direct", fmt(fcm.back())});
        table.rows.push_back({fmt_int(t), fmt_int(seed), "kmeans_direct_standardized_summary", fmt(km_z.back())});
        table.rows.push_back({fmt_int(t), fmt_int(seed), "fcm_direct_standardized_summary", fmt(fcm_z.back())});
        table.rows.push_back({fmt_int(t), fmt_int(seed), "kmeans_direct_summary", fmt(km_s.back())});
        table.rows.push_back({fmt_int(t), fmt_int(seed), "fcm_direct_summary", fmt(fcm_s.back())});
    }
    double gap_km = 1.0;
    double gap_fcm = 1.0;
    for (std::size_t t = 0; t < jmpp.size(); ++t) {
        gap_km = std::min(gap_km, jmpp[t] - km[t]);
        gap_fcm = std::min(gap_fcm, jmpp[t] - fcm[t]);
    }
    json metrics{{"jmpp_csr_mean", mean_of(jmpp)},
                 {"kmeans_direct_csr_mean", mean_of(km)},
                 {"fcm_direct_csr_mean", mean_of(fcm)},
                 {"jmpp_csr_trials", jmpp},
                 {"kmeans_direct_csr_trials", km},
                 {"fcm_direct_csr_trials", fcm},
                 {"min_gap_kmeans", gap_km},
                 {"min_gap_fcm", gap_fcm},
                 {"kmeans_direct_standardized_summary_csr_mean", mean_of(km_z)},
                 {"fcm_direct_standardized_summary_csr_mean", mean_of(fcm_z)},
                 {"kmeans_direct_summary_csr_mean", mean_of(km_s)},
                 {"fcm_direct_summary_csr_mean", mean_of(fcm_s)},
                 {"failures", failures}};
    return {metrics, {table}};
}

ExperimentResult fig8(const ExperimentConfig& c) {
    const SystemModel model = c.model();
    const std::size_t n_rates = c.update_rates.size();
    const std::size_t n_h = c.horizons.size();
    // err[t][r][h], power[t][r][h], count[t][r][h]
    std::vector<std::vector<double>> err(c.trials, std::vector<double>(n_rates * n_h, 0.0));
    std::vector<std::vector<double>> power(c.trials, std::vector<double>(n_rates * n_h, 0.0));
    std::vector<std::vector<double>> count(c.trials, std::vector<double>(n_rates * n_h, 0.0));
    std::vector<std::string> failure(c.trials);
    parallel_for(
        c.trials,
        [&](std::size_t t) {
            const ClassHyperParams& h = c.classes[t % c.classes.size()];
            const std::uint64_t seed = *c.seed + t;
            try {
                const MotionProfile profile = sample_profile(h, seed, c.mode);
                for (std::size_t ri = 0; ri < n_rates; ++ri) {
                    const SynthTrajectory traj = synthesize(profile, model, c.trajectory_length, c.update_rates[ri],
                                                            default_initial_state(), seed, c.mode);
                    const EstimatedTrajectory est = estimate(traj, model);
                    for (std::size_t hi = 0; hi < n_h; ++hi) {
                        const std::size_t horizon = c.horizons[hi];
                        for (const FilterState& s : est.filter_states) {
                            const std::size_t target = s.timestep_index + horizon;
                            if (target >= traj.states.size()) break;
                            const StateVector p = predict_ahead(s, model, horizon).back();
                            const Vec3& truth = traj.states[target].position;
                            err[t][ri * n_h + hi] += (p.position - truth).squaredNorm();
                            power[t][ri * n_h + hi] += truth.squaredNorm();
                            count[t][ri * n_h + hi] += 1.0;
                        }
                    }
                }
            } catch (const std::exception& e) {
                failure[t] = e.what();
            }
        },
        c.workers);
    for (std::size_t t = 0; t < c.trials; ++t) {
        if (!failure[t].empty()) throw ExperimentFailure(failure[t], *c.seed + t, static_cast<int>(t));
    }
    CsvTable table{"fig8.csv", {"r", "horizon", "mse_ratio", "mse"}, {}};
    json rows = json::array();
    for (std::size_t ri = 0; ri < n_rates; ++ri) {
        for (std::size_t hi = 0; hi < n_h; ++hi) {
            double e = 0.0;
            double p = 0.0;
            double n = 0.0;
            for (std::size_t t = 0; t < c.trials; ++t) {
                e += err[t][ri * n_h + hi];
                p += power[t][ri * n_h + hi];
                n += count[t][ri * n_h + hi];
            }
            const double ratio = e / p;
            const double mse = e / n;
            table.rows.push_back({fmt(c.update_rates[ri]), fmt_int(c.horizons[hi]), fmt(ratio), fmt(mse)});
            rows.push_back({{"r", c.update_rates[ri]}, {"horizon", c.horizons[hi]}, {"mse_ratio", ratio}, {"mse", mse}});
        }
    }
    return {{{"rows", rows}}, {table}};
}

ExperimentResult fig9(const ExperimentConfig& c) {
    const bool map_primary = c.estimator == "map";
    CsvTable table{"fig9.csv", {"q", "snr", "snr_db", "csr"}, {}};
    json rows = json::array();
    json failures = json::array();
    for (double q : c.noise_scales) {
        ExperimentConfig cq = c;
        cq.measurement_noise = q;
        const SystemModel model = cq.model();
        std::vector<double> csr;
        double power = 0.0;
        double samples = 0.0;
        for (std::size_t t = 0; t < c.trials; ++t) {
            const std::uint64_t seed = trial_seed(c, t);
            const auto population = generate_population(c.classes, c.objects_per_class, model, c.trajectory_length,
                                                        c.update_rate, seed, c.mode);
            // Signal power: per-axis variance of the true positions about each
            // trajectory's own mean.
            const int axes = c.mode == MotionMode::planar ? 2 : 3;
            for (const SynthTrajectory& traj : population) {
                Vec3 mean = Vec3::Zero();
                for (std::size_t k = 1; k < traj.states.size(); ++k) mean += traj.states[k].position;
                mean /= static_cast<double>(traj.states.size() - 1);
                for (std::size_t k = 1; k < traj.states.size(); ++k) {
                    const Vec3 d = traj.states[k].position - mean;
                    power += d.head(axes).squaredNorm() / axes;
                    samples += 1.0;
                }
            }
            const PipelineOutput out = run_pipeline(population, cq, model, map_primary, !map_primary);
            csr.push_back(evaluate_confusion(map_primary ? out.predicted_map : out.predicted_ml, out.truth).csr);
            for (const json& f : failures_json(out.failures, seed)) failures.push_back(f);
        }
        const double snr = power / samples / q;
        const double snr_db = 10.0 * std::log10(snr);
        table.rows.push_back({fmt(q), fmt(snr), fmt(snr_db), fmt(mean_of(csr))});
        rows.push_back({{"q", q}, {"snr", snr}, {"snr_db", snr_db}, {"csr", mean_of(csr)}, {"csr_trials", csr}});
    }
    return {{{"rows", rows}, {"failures", failures}}, {table}};
}

struct Fig10Trial {
    std::vector<double> mse;
    std::vector<int> count;
    std::size_t errors = 0;
};

ExperimentResult fig10(const ExperimentConfig& c) {
    const SystemModel model = c.model();
    CsvTable summary{"fig10.csv", {"segment_length", "segment", "mse", "class_count_mean"}, {}};
    CsvTable detail{"fig10_trials.csv", {"segment_length", "trial", "segment", "mse", "class_count"}, {}};
    json final_mse = json::object();
    json curves = json::array();
    for (std::size_t length : c.segment_lengths) {
        std::vector<Fig10Trial> runs(c.trials);
        std::vector<std::string> failure(c.trials);
        parallel_for(
            c.trials,
            [&](std::size_t t) {
                const std::uint64_t seed = trial_seed(c, t);
                try {
                    const auto population = generate_population(c.classes, c.objects_per_class, model,
                                                                 length * c.segments, c.update_rate, seed, c.mode);
                    std::map<int, int> truth;
                    for (const SynthTrajectory& p : population) truth[p.profile.object_id] = p.true_class;
                    const OnlineConfig oc = c.online_config(seed);
                    ClassRegistry registry;
                    for (std::size_t s = 1; s <= c.segments; ++s) {
                        SegmentBatch batch;
                        batch.segment_index = s;
                        batch.segment_length = length;
                        for (const SynthTrajectory& p : population) {
                            ObjectWindow w;
                            w.object_id = p.profile.object_id;
                            w.observations.assign(p.observations.begin() + static_cast<std::ptrdiff_t>((s - 1) * length),
                                                  p.observations.begin() + static_cast<std::ptrdiff_t>(s * length));
                            batch.windows.push_back(std::move(w));
                        }
                        IngestResult r = ingest_segment(batch, registry, oc);
                        registry = std::move(r.registry);
                        runs[t].errors += r.errors.size();
                        runs[t].mse.push_back(hyper_mse(c.classes, registry, truth, c.mode));
                        runs[t].count.push_back(registry.current_count());
                    }
                } catch (const std::exception& e) {
                    failure[t] = e.what();
                }
            },
            c.workers);
        for (std::size_t t = 0; t < c.trials; ++t) {
            if (!failure[t].empty()) throw ExperimentFailure(failure[t], trial_seed(c, t), -1);
        }
        json curve = json::array();
        for (std::size_t s = 0; s < c.segments; ++s) {
            double mse = 0.0;
            double count = 0.0;
            for (std::size_t t = 0; t < c.trials; ++t) {
                mse += runs[t].mse[s];
                count += runs[t].count[s];
                detail.rows.push_back({fmt_int(length), fmt_int(t), fmt_int(s + 1), fmt(runs[t].mse[s]),
                                       fmt_int(runs[t].count[s])});
            }
            mse /= static_cast<double>(c.trials);
            count /= static_cast<double>(c.trials);
            summary.rows.push_back({fmt_int(length), fmt_int(s + 1), fmt(mse), fmt(count)});
            curve.push_back({{"segment", s + 1}, {"mse", mse}, {"class_count_mean", count}});
        }
        std::size_t errors = 0;
        for (const Fig10Trial& r : runs) errors += r.errors;
        final_mse[std::to_string(length)] = curve.back()["mse"];
        curves.push_back({{"segment_length", length}, {"curve", curve}, {"object_errors", errors}});
    }
    return {{{"final_mse", final_mse}, {"curves", curves}}, {summary, detail}};
}

ExperimentResult fig11(const ExperimentConfig& c) {
    const SystemModel model = c.model();
    std::vector<std::size_t> grid = c.new_object_counts;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::size_t max_new = grid.back();
    const int known = static_cast<int>(c.classes.size());
    const int target = c.null_stream ? known : known + 1;
    // Half the trial stride, so streamed objects never reuse a seed of any
    // trial's base population.
    constexpr int kFirstNewId = 500'000;

    std::vector<std::vector<int>> counts(c.trials);
    std::vector<int> base_counts(c.trials, 0);
    std::vector<std::string> failure(c.trials);
    parallel_for(
        c.trials,
        [&](std::size_t t) {
            const std::uint64_t seed = trial_seed(c, t);
            try {
                const OnlineConfig oc = c.online_config(seed);
                const auto to_batch = [&](auto first, auto last) {
                    SegmentBatch b;
                    b.segment_index = 1;
                    b.segment_length = c.trajectory_length;
                    for (auto it = first; it != last; ++it) b.windows.push_back({it->profile.object_id, it->observations});
                    return b;
                };
                const auto base = generate_population(c.classes, c.objects_per_class, model, c.trajectory_length,
                                                      c.update_rate, seed, c.mode);
                ClassRegistry registry = ingest_segment(to_batch(base.begin(), base.end()), ClassRegistry{}, oc).registry;
                base_counts[t] = registry.current_count();

                std::vector<SynthTrajectory> stream;
                if (c.null_stream) {
                    const std::size_t per = (max_new + c.classes.size() - 1) / c.classes.size();
                    const auto extra = generate_population(c.classes, std::max<std::size_t>(per, 1), model,
                                                           c.trajectory_length, c.update_rate, seed, c.mode, kFirstNewId);
                    for (std::size_t i = 0; i < max_new; ++i) {
                        stream.push_back(extra[(i % c.classes.size()) * per + i / c.classes.size()]);
                    }
                } else if (max_new > 0) {
                    stream = generate_population({*c.new_class}, max_new, model, c.trajectory_length, c.update_rate,
                                                 seed, c.mode, kFirstNewId);
                }
                std::size_t done = 0;
                for (std::size_t n : grid) {
                    if (n > done) {
                        OnlineConfig step = oc;
                        step.seed = seed + n;
                        registry = ingest_segment(to_batch(stream.begin() + static_cast<std::ptrdiff_t>(done),
                                                           stream.begin() + static_cast<std::ptrdiff_t>(n)),
                                                  registry, step)
                                       .registry;
                        done = n;
                    }
                    counts[t].push_back(registry.current_count());
                }
            } catch (const std::exception& e) {
                failure[t] = e.what();
            }
        },
        c.workers);
    for (std::size_t t = 0; t < c.trials; ++t) {
        if (!failure[t].empty()) throw ExperimentFailure(failure[t], trial_seed(c, t), -1);
    }

    const std::string column = c.null_stream ? "false_genesis_probability" : "detection_probability";
    CsvTable table{"fig11.csv", {"n_new_objects", column}, {}};
    CsvTable detail{"fig11_trials.csv", {"trial", "base_count", "n_new_objects", "class_count"}, {}};
    json probability = json::object();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        int hits = 0;
        for (std::size_t t = 0; t < c.trials; ++t) {
            const int count = counts[t][g];
            hits += c.null_stream ? count != target : count == target;
            detail.rows.push_back({fmt_int(t), fmt_int(base_counts[t]), fmt_int(grid[g]), fmt_int(count)});
        }
        const double p = static_cast<double>(hits) / static_cast<double>(c.trials);
        table.rows.push_back({fmt_int(grid[g]), fmt(p)});
        probability[std::to_string(grid[g])] = p;
    }
    const auto recognized = std::count(base_counts.begin(), base_counts.end(), known);
    json metrics{{column, probability},
                 {"base_recognized_rate", static_cast<double>(recognized) / static_cast<double>(c.trials)},
                 {"known_classes", known}};
    return {metrics, {table, detail}};
}

std::string csv_text(const CsvTable& t) {
    std::ostringstream out;
    out << join(t.header, ",") << '\n';
    for (const auto& row : t.rows) out << join(row, ",") << '\n';
    return out.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    if (std::vector<std::string> bad = validate(config); !bad.empty()) throw ConfigError(bad);
    const std::string& e = config.experiment;
    if (e == "filter_accuracy") return filter_accuracy(config);
    if (e == "table2") return table2(config);
    if (e == "table3") return table3(config);
    if (e == "fig8") return fig8(config);
    if (e == "fig9") return fig9(config);
    if (e == "fig10") return fig10(config);
    return fig11(config);
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                   const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    const json doc{{"config", config_to_json(config)},
                   {"metrics", result.metrics},
                   {"seed", *config.seed},
                   {"version", std::string(kVersion)}};
    {
        std::ofstream out(directory / "results.json", std::ios::binary);
        out << doc.dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write results.json");
    }
    for (const CsvTable& t : result.tables) {
        std::ofstream out(directory / t.file_name, std::ios::binary);
        out << csv_text(t);
        if (!out) throw std::runtime_error("cannot write " + t.file_name);
    }
}

}  // namespace mobprof
