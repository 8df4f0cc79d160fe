#include "mglstm/experiment.hpp"

#include "mglstm/error.hpp"
#include "mglstm/rng.hpp"
#include "mglstm/text_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::json;

namespace mglstm {

namespace {

std::string join(const std::vector<double>& xs)
{
    std::string out;
    for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? ", " : "") + format_tag(xs[k]);
    return out;
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    for (const auto& item : split(text, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_double(item));
    }
    return out;
}

std::string section_mg(const ExperimentConfig& c)
{
    std::ostringstream s;
    s << "[mg]\n"
      << "beta = " << format_tag(c.mg.beta) << '\n'
      << "gamma = " << format_tag(c.mg.gamma) << '\n'
      << "tau = " << format_tag(c.mg.tau) << '\n'
      << "exponent = " << format_tag(c.mg.exponent) << '\n'
      << "history_value = " << format_tag(c.mg.history_value) << '\n'
      << "dt_int = " << format_tag(c.mg.dt_int) << '\n'
      << "transient = " << format_tag(c.mg.transient) << '\n'
      << "\n[data]\n"
      << "n_train = " << c.n_train << '\n'
      << "n_test = " << c.n_test << '\n';
    return s.str();
}

std::string section_train(const ExperimentConfig& c)
{
    const TrainConfig& t = c.train;
    std::ostringstream s;
    s << "[train]\n"
      << "n_cells = " << t.n_cells << '\n'
      << "candidate = " << to_string(t.candidate) << '\n'
      << "seq_len = " << t.seq_len << '\n'
      << "n_epochs = " << t.n_epochs << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "learning_rate = " << format_tag(t.learning_rate) << '\n'
      << "adam_beta1 = " << format_tag(t.adam_beta1) << '\n'
      << "adam_beta2 = " << format_tag(t.adam_beta2) << '\n'
      << "adam_epsilon = " << format_tag(t.adam_epsilon) << '\n'
      << "grad_clip = " << format_tag(t.grad_clip) << '\n'
      << "init_scale = " << format_tag(t.init_scale) << '\n'
      << "forget_bias = " << format_tag(t.forget_bias) << '\n'
      << "checkpoint_every = " << c.checkpoint_every << '\n';
    return s.str();
}

std::string section_diagnostics(const ExperimentConfig& c)
{
    std::ostringstream s;
    s << "[impulse]\n"
      << "period = " << c.impulse.period << '\n'
      << "magnitude = " << format_tag(c.impulse.magnitude) << '\n'
      << "n_ensembles = " << c.impulse.n_ensembles << '\n';
    return s.str();
}

std::string section_experiment(const ExperimentConfig& c, bool runtime)
{
    std::ostringstream s;
    s << "[experiment]\n";
    if (runtime) s << "output_dir = " << c.output_dir.string() << '\n';
    s << "global_seed = " << c.global_seed << '\n'
      << "sigmas = " << join(c.sigmas) << '\n'
      << "eval_sigmas = " << join(c.eval_sigmas) << '\n'
      << "washout = " << c.washout << '\n';
    if (runtime) s << "jobs = " << c.jobs << '\n';
    return s.str();
}

/// Config text without keys that do not influence results.
std::string hashed_text(const ExperimentConfig& c)
{
    return section_experiment(c, false) + '\n' + section_mg(c) + '\n' + section_train(c) + '\n' +
           section_diagnostics(c);
}

std::ofstream open_out(const fs::path& path)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw MissingArtifact("cannot open for writing: " + path.string());
    return out;
}

void require_file(const fs::path& path, const std::string& producer)
{
    if (!fs::exists(path))
        throw MissingArtifact(path.string() + " not found; run the `" + producer + "` subcommand first");
}

}  // namespace

void ExperimentConfig::validate() const
{
    mg_config().validate();
    train.validate();
    if (sigmas.empty()) throw ConfigError("experiment.sigmas must not be empty");
    if (!std::is_sorted(sigmas.begin(), sigmas.end()) ||
        std::adjacent_find(sigmas.begin(), sigmas.end()) != sigmas.end())
        throw ConfigError("experiment.sigmas must be strictly ascending");
    for (double s : sigmas)
        if (!(s >= 0)) throw ConfigError("experiment.sigmas must be non-negative");
    for (double s : eval_sigmas)
        if (!(s >= 0)) throw ConfigError("experiment.eval_sigmas must be non-negative");
    if (n_train < static_cast<std::size_t>(train.seq_len) + 1) throw ConfigError("data.n_train shorter than one window");
    if (n_test < washout + 2) throw ConfigError("data.n_test must exceed experiment.washout + 1");
    if (n_test < impulse_required_length(impulse))
        throw ConfigError("data.n_test = " + std::to_string(n_test) + " is shorter than the " +
                          std::to_string(impulse_required_length(impulse)) + " samples the impulse experiment needs");
    if (impulse.period < 1 || impulse.n_ensembles < 1) throw ConfigError("impulse.period and n_ensembles must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
    if (output_dir.empty()) throw ConfigError("experiment.output_dir must not be empty");
}

std::string ExperimentConfig::to_text() const
{
    return section_experiment(*this, true) + '\n' + section_mg(*this) + '\n' + section_train(*this) + '\n' +
           section_diagnostics(*this);
}

MgConfig ExperimentConfig::mg_config() const
{
    MgConfig m = mg;
    m.t_end = m.transient + static_cast<double>(n_train + n_test) - 1.0;
    return m;
}

TrainConfig ExperimentConfig::train_config(double sigma) const
{
    TrainConfig t = train;
    t.seed = rng::derive_seed(global_seed, "train", sigma);
    return t;
}

ExperimentConfig preset(std::string_view name)
{
    ExperimentConfig c;
    if (name == "desk") {
        c.train.n_cells = 32;
        c.train.n_epochs = 1600;
        c.train.learning_rate = 3e-3;
        c.output_dir = "experiment_desk";
    } else if (name == "paper") {
        c.train.n_cells = 128;
        c.train.n_epochs = 2000;
        c.train.learning_rate = 1e-3;
        c.output_dir = "experiment_paper";
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk|paper)");
    }
    return c;
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig c)
{
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config: key '" + section + "' must live inside a [section]");
        for (const auto& [key, node] : body) {
            const std::string v = node.data();
            const std::string where = section + "." + key;
            auto as_int = [&] {
                try {
                    return std::stol(v);
                } catch (const std::exception&) {
                    throw ConfigError("config: " + where + " expects an integer, got '" + v + "'");
                }
            };
            auto as_real = [&] {
                try {
                    return parse_double(v);
                } catch (const FormatError&) {
                    throw ConfigError("config: " + where + " expects a number, got '" + v + "'");
                }
            };
            bool known = true;
            if (section == "experiment") {
                if (key == "output_dir") c.output_dir = v;
                else if (key == "global_seed") c.global_seed = std::stoull(v);
                else if (key == "sigmas") c.sigmas = parse_list(v);
                else if (key == "eval_sigmas") c.eval_sigmas = parse_list(v);
                else if (key == "washout") c.washout = static_cast<std::size_t>(as_int());
                else if (key == "jobs") c.jobs = static_cast<int>(as_int());
                else known = false;
            } else if (section == "mg") {
                if (key == "beta") c.mg.beta = as_real();
                else if (key == "gamma") c.mg.gamma = as_real();
                else if (key == "tau") c.mg.tau = as_real();
                else if (key == "exponent") c.mg.exponent = as_real();
                else if (key == "history_value") c.mg.history_value = as_real();
                else if (key == "dt_int") c.mg.dt_int = as_real();
                else if (key == "transient") c.mg.transient = as_real();
                else known = false;
            } else if (section == "data") {
                if (key == "n_train") c.n_train = static_cast<std::size_t>(as_int());
                else if (key == "n_test") c.n_test = static_cast<std::size_t>(as_int());
                else known = false;
            } else if (section == "train") {
                TrainConfig& t = c.train;
                if (key == "n_cells") t.n_cells = static_cast<int>(as_int());
                else if (key == "candidate") t.candidate = candidate_from_string(v);
                else if (key == "seq_len") t.seq_len = static_cast<int>(as_int());
                else if (key == "n_epochs") t.n_epochs = static_cast<int>(as_int());
                else if (key == "batch_size") t.batch_size = static_cast<int>(as_int());
                else if (key == "learning_rate") t.learning_rate = as_real();
                else if (key == "adam_beta1") t.adam_beta1 = as_real();
                else if (key == "adam_beta2") t.adam_beta2 = as_real();
                else if (key == "adam_epsilon") t.adam_epsilon = as_real();
                else if (key == "grad_clip") t.grad_clip = as_real();
                else if (key == "init_scale") t.init_scale = as_real();
                else if (key == "forget_bias") t.forget_bias = as_real();
                else if (key == "checkpoint_every") c.checkpoint_every = as_int();
                else known = false;
            } else if (section == "impulse") {
                if (key == "period") c.impulse.period = static_cast<int>(as_int());
                else if (key == "magnitude") c.impulse.magnitude = as_real();
                else if (key == "n_ensembles") c.impulse.n_ensembles = static_cast<int>(as_int());
                else known = false;
            } else {
                throw ConfigError("config: unknown section [" + section + "]");
            }
            if (!known) throw ConfigError("config: unknown key " + where);
        }
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in, std::move(base));
}

std::string hash_hex(std::string_view text)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng::fnv1a64(text)));
    return buf;
}

Model load_model_path(const fs::path& path)
{
    if (fs::is_directory(path)) return load_model((path / "model.txt").string());
    return load_model(path.string());
}

void write_alpha_row_header(std::ostream& out)
{
    out << "sigma,alpha,ratio\n";
}

void write_alpha_row(std::ostream& out, double sigma, const AlphaResult& a)
{
    out << format_tag(sigma) << ',' << format_double(a.alpha) << ','
        << (a.ratio_overflow ? std::string("inf") : format_double(a.ratio)) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

std::mutex manifest_mutex;

json read_manifest(const fs::path& path)
{
    if (!fs::exists(path)) return json{{"stages", json::object()}};
    std::ifstream in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw StaleArtifact("unreadable manifest " + path.string() + ": " + e.what() +
                            "; remove the output directory and rerun");
    }
}

void write_manifest(const fs::path& path, const json& manifest)
{
    auto out = open_out(path);
    out << manifest.dump(2) << '\n';
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig config, std::ostream* log) : config_(std::move(config)), log_(log)
{
    config_.validate();
}

fs::path Pipeline::data_dir() const { return config_.output_dir / "data"; }
fs::path Pipeline::models_dir() const { return config_.output_dir / "models"; }
fs::path Pipeline::results_dir() const { return config_.output_dir / "results"; }
fs::path Pipeline::manifest_path() const { return config_.output_dir / "manifest.json"; }
fs::path Pipeline::clean_data_path() const { return data_dir() / "mg_clean.csv"; }

fs::path Pipeline::noisy_data_path(double sigma) const
{
    return data_dir() / ("noisy_" + format_tag(sigma) + ".csv");
}

fs::path Pipeline::model_dir(double sigma) const { return models_dir() / ("sigma_" + format_tag(sigma)); }
fs::path Pipeline::model_path(double sigma) const { return model_dir(sigma) / "model.txt"; }

void Pipeline::say(const std::string& line) const
{
    if (!log_) return;
    std::lock_guard lock(manifest_mutex);
    *log_ << line << std::endl;
}

std::string Pipeline::generate_hash() const
{
    return hash_hex("generate\n" + section_mg(config_) + "seed=" + std::to_string(config_.global_seed) +
                    "\nsigmas=" + join(config_.sigmas));
}

std::string Pipeline::train_hash(double sigma) const
{
    return hash_hex("train\n" + generate_hash() + '\n' + section_train(config_) + "sigma=" + format_tag(sigma));
}

std::string Pipeline::diagnostics_hash() const
{
    return hash_hex("diagnostics\n" + hashed_text(config_));
}

template <class Fn>
void Pipeline::run_stage(const std::string& key, const std::string& stage_hash, const std::vector<fs::path>& outputs,
                         std::uint64_t seed, Fn&& body)
{
    {
        std::lock_guard lock(manifest_mutex);
        const json manifest = read_manifest(manifest_path());
        const json* entry = nullptr;
        if (manifest.contains("stages") && manifest["stages"].contains(key)) entry = &manifest["stages"][key];
        const bool all_exist = std::all_of(outputs.begin(), outputs.end(), [](const fs::path& p) { return fs::exists(p); });
        const bool any_exist = std::any_of(outputs.begin(), outputs.end(), [](const fs::path& p) { return fs::exists(p); });
        const bool hash_matches = entry && entry->value("hash", "") == stage_hash;
        if (all_exist && hash_matches) {
            records_.push_back({key, true, 0.0});
            if (log_) *log_ << "[skip] " << key << " (up to date)" << std::endl;
            return;
        }
        if (any_exist && !hash_matches)
            throw StaleArtifact("stage '" + key + "' has outputs in " + config_.output_dir.string() +
                                " from a different configuration; remove the directory for a clean rerun");
    }

    say("[run ] " + key);
    const auto start = std::chrono::steady_clock::now();
    body();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::lock_guard lock(manifest_mutex);
    json manifest = read_manifest(manifest_path());
    manifest["config_hash"] = hash_hex(hashed_text(config_));
    manifest["config"] = config_.to_text();
    json outs = json::array();
    for (const auto& p : outputs) outs.push_back(fs::relative(p, config_.output_dir).generic_string());
    manifest["stages"][key] = {{"hash", stage_hash}, {"seed", seed}, {"wall_seconds", seconds}, {"outputs", outs}};
    write_manifest(manifest_path(), manifest);
    records_.push_back({key, false, seconds});
}

void Pipeline::generate()
{
    std::vector<fs::path> outputs{clean_data_path()};
    for (double s : config_.sigmas) outputs.push_back(noisy_data_path(s));
    run_stage("generate", generate_hash(), outputs, config_.global_seed, [&] {
        const MgConfig mg = config_.mg_config();
        auto traj = std::make_shared<const Trajectory>(integrate_mg(mg));
        fs::create_directories(data_dir());
        write_dataset_csv(clean_data_path().string(), mg, add_noise(traj, 0.0, 0));
        for (double s : config_.sigmas) {
            const auto seed = rng::derive_seed(config_.global_seed, "noise", s);
            write_dataset_csv(noisy_data_path(s).string(), mg, add_noise(traj, s, seed));
        }
    });
}

void Pipeline::train(std::optional<double> only)
{
    std::vector<double> todo;
    if (only) {
        if (std::find(config_.sigmas.begin(), config_.sigmas.end(), *only) == config_.sigmas.end())
            throw ConfigError("sigma " + format_tag(*only) + " is not in experiment.sigmas");
        todo.push_back(*only);
    } else {
        todo = config_.sigmas;
    }
    for (double s : todo) require_file(noisy_data_path(s), "generate");

    auto train_one = [this](double sigma) {
        const TrainConfig tc = config_.train_config(sigma);
        const fs::path dir = model_dir(sigma);
        run_stage("train/sigma_" + format_tag(sigma), train_hash(sigma), {model_path(sigma), dir / "train_log.csv"},
                  tc.seed, [&] {
                      const NoisySeries full = read_dataset_csv(noisy_data_path(sigma).string());
                      if (full.size() != config_.n_train + config_.n_test)
                          throw StaleArtifact(noisy_data_path(sigma).string() +
                                              " does not match the configured data length; rerun from a clean directory");
                      const NoisySeries series = full.segment(0, config_.n_train);
                      fs::create_directories(dir);
                      auto log = open_out(dir / "train_log.csv");
                      log << "step,loss,grad_norm\n";
                      TrainHooks hooks;
                      const long every = std::max(1L, planned_steps(tc, series.size()) / 10);
                      hooks.on_step = [&](const TrainLogRow& r) {
                          log << r.step << ',' << format_double(r.loss) << ',' << format_double(r.grad_norm) << '\n';
                          if (r.step % every == 0)
                              say("  sigma=" + format_tag(sigma) + " step " + std::to_string(r.step) +
                                  " loss " + format_double(r.loss));
                      };
                      hooks.checkpoint_every = config_.checkpoint_every;
                      hooks.on_checkpoint = [&](long step, const Model& m) {
                          fs::create_directories(dir / "checkpoints");
                          save_model((dir / "checkpoints" / ("step_" + std::to_string(step) + ".txt")).string(), m);
                      };
                      try {
                          const TrainResult result = mglstm::train(sigma, series, tc, hooks);
                          log.close();
                          save_model(model_path(sigma).string(), result.model);
                      } catch (const TrainingDivergence& e) {
                          save_model((dir / "last_finite_model.txt").string(), e.last_finite());
                          throw;
                      }
                  });
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t jobs = config_.jobs > 0 ? static_cast<std::size_t>(config_.jobs) : hw;
    if (jobs <= 1 || todo.size() <= 1) {
        for (double s : todo) train_one(s);
        return;
    }
    for (std::size_t begin = 0; begin < todo.size(); begin += jobs) {
        std::vector<std::future<void>> running;
        for (std::size_t k = begin; k < std::min(todo.size(), begin + jobs); ++k)
            running.push_back(std::async(std::launch::async, train_one, todo[k]));
        for (auto& f : running) f.get();
    }
}

void Pipeline::require_models() const
{
    require_file(clean_data_path(), "generate");
    for (double s : config_.sigmas) require_file(model_path(s), "train");
}

Trajectory Pipeline::load_test_trajectory() const
{
    require_file(clean_data_path(), "generate");
    const NoisySeries clean = read_dataset_csv(clean_data_path().string());
    if (clean.size() != config_.n_train + config_.n_test)
        throw StaleArtifact(clean_data_path().string() + " does not match the configured data length");
    return clean.source->segment(config_.n_train, config_.n_test);
}

std::vector<Model> Pipeline::load_models() const
{
    std::vector<Model> models;
    for (double s : config_.sigmas) {
        require_file(model_path(s), "train");
        models.push_back(load_model(model_path(s).string()));
    }
    return models;
}

void Pipeline::evaluate()
{
    require_models();
    std::vector<fs::path> outputs{results_dir() / "evaluate.csv"};
    for (double s : config_.sigmas) outputs.push_back(results_dir() / ("prediction_" + format_tag(s) + ".csv"));
    run_stage("evaluate", diagnostics_hash(), outputs, config_.global_seed, [&] {
        const std::vector<Model> models = load_models();
        auto summary = open_out(results_dir() / "evaluate.csv");
        summary << "sigma,e_mu,e_mu_zeroth\n";
        for (std::size_t k = 0; k < models.size(); ++k) {
            const double sigma = config_.sigmas[k];
            const NoisySeries full = read_dataset_csv(noisy_data_path(sigma).string());
            const NoisySeries test = full.segment(config_.n_train, config_.n_test);
            const Trajectory& truth = *test.source;
            const PredictionRun run = sequential_predict(models[k], test.values, truth.values);
            if (run.scaler_warning) say("warning: sigma=" + format_tag(sigma) + " inputs exceed the model scaler range by more than 3 nu");
            summary << format_tag(sigma) << ',' << format_double(one_step_nrmse(run, truth.nu, config_.washout)) << ','
                    << format_double(zeroth_order_nrmse(test.values, truth.values, truth.nu, config_.washout)) << '\n';
            auto out = open_out(results_dir() / ("prediction_" + format_tag(sigma) + ".csv"));
            out << "t,mu,y,y_hat\n";
            for (std::size_t t = 1; t < run.inputs.size(); ++t)
                out << format_double(truth.times[t]) << ',' << format_double(truth.values[t]) << ','
                    << format_double(run.inputs[t]) << ',' << format_double(run.preds[t - 1]) << '\n';
        }
    });
}

void Pipeline::alpha()
{
    require_models();
    std::vector<fs::path> outputs{results_dir() / "alpha_vs_sigma.csv", results_dir() / "alpha_clean_vs_sigma.csv"};
    for (double s : config_.sigmas) outputs.push_back(results_dir() / ("alpha_trace_" + format_tag(s) + ".csv"));
    run_stage("alpha", diagnostics_hash(), outputs, config_.global_seed, [&] {
        const std::vector<Model> models = load_models();
        const Trajectory clean = load_test_trajectory();
        auto own = open_out(results_dir() / "alpha_vs_sigma.csv");
        auto matched = open_out(results_dir() / "alpha_clean_vs_sigma.csv");
        write_alpha_row_header(own);
        write_alpha_row_header(matched);
        const CaptureFlags traces{false, true};
        for (std::size_t k = 0; k < models.size(); ++k) {
            const double sigma = config_.sigmas[k];
            const NoisySeries test =
              read_dataset_csv(noisy_data_path(sigma).string()).segment(config_.n_train, config_.n_test);
            const PredictionRun run = sequential_predict(models[k], test.values, {}, traces);
            write_alpha_row(own, sigma, contribution_alpha(run, config_.washout));
            const PredictionRun clean_run = sequential_predict(models[k], clean.values, {}, traces);
            write_alpha_row(matched, sigma, contribution_alpha(clean_run, config_.washout));

            auto trace = open_out(results_dir() / ("alpha_trace_" + format_tag(sigma) + ".csv"));
            trace << "t,wh_h_l1,wy_y_l1\n";
            for (std::size_t t = 0; t < run.traces.size(); ++t) {
                const auto [rec, dat] = l1_contribution(run.traces[t]);
                trace << t << ',' << format_double(rec) << ',' << format_double(dat) << '\n';
            }
        }
    });
}

void Pipeline::sweep()
{
    require_models();
    const std::vector<fs::path> outputs{results_dir() / "nrmse_sweep.csv", results_dir() / "zeroth_order.csv"};
    run_stage("sweep", diagnostics_hash(), outputs, config_.global_seed, [&] {
        const std::vector<Model> models = load_models();
        const Trajectory clean = load_test_trajectory();
        const SweepTable table = noise_sweep(models, clean, config_.eval_sigmas, config_.global_seed, config_.washout);
        auto out = open_out(outputs[0]);
        out << "train_sigma,eval_sigma,e_mu\n";
        for (std::size_t m = 0; m < table.train_sigmas.size(); ++m)
            for (std::size_t e = 0; e < table.eval_sigmas.size(); ++e)
                out << format_tag(table.train_sigmas[m]) << ',' << format_tag(table.eval_sigmas[e]) << ','
                    << format_double(table.e_mu[m][e]) << '\n';
        auto zeroth = open_out(outputs[1]);
        zeroth << "eval_sigma,e_mu\n";
        for (std::size_t e = 0; e < table.eval_sigmas.size(); ++e)
            zeroth << format_tag(table.eval_sigmas[e]) << ',' << format_double(table.zeroth_order[e]) << '\n';
    });
}

void Pipeline::impulse()
{
    require_models();
    std::vector<fs::path> outputs{results_dir() / "impulse_summary.csv"};
    for (double s : config_.sigmas) outputs.push_back(results_dir() / ("impulse_profile_" + format_tag(s) + ".csv"));
    run_stage("impulse", diagnostics_hash(), outputs, config_.global_seed, [&] {
        const std::vector<Model> models = load_models();
        const Trajectory clean = load_test_trajectory();
        auto summary = open_out(outputs[0]);
        summary << "sigma,e_0,lambda,e_0_impulse,e_mu\n";
        for (std::size_t k = 0; k < models.size(); ++k) {
            const double sigma = config_.sigmas[k];
            auto profile = open_out(results_dir() / ("impulse_profile_" + format_tag(sigma) + ".csv"));
            profile << "n,e_n\n";
            try {
                const ImpulseResult r = impulse_experiment(models[k], clean, config_.impulse);
                for (std::size_t n = 0; n < r.e_n.size(); ++n) profile << n << ',' << format_double(r.e_n[n]) << '\n';
                summary << format_tag(sigma) << ',' << format_double(r.e_0) << ',' << format_double(r.lambda) << ','
                        << format_double(r.e_0_impulse) << ',' << format_double(r.e_mu_baseline) << '\n';
            } catch (const DegenerateRelaxation& e) {
                say("warning: sigma=" + format_tag(sigma) + ": " + e.what());
                summary << format_tag(sigma) << ",nan,nan,nan,nan\n";
            }
        }
    });
}

void Pipeline::report()
{
    const std::vector<std::pair<std::string, std::string>> tables{
      {"evaluate.csv", "evaluate"}, {"alpha_vs_sigma.csv", "alpha"},   {"alpha_clean_vs_sigma.csv", "alpha"},
      {"nrmse_sweep.csv", "sweep"}, {"zeroth_order.csv", "sweep"},     {"impulse_summary.csv", "impulse"}};
    for (const auto& [file, producer] : tables) require_file(results_dir() / file, producer);
    const fs::path out_path = results_dir() / "report.md";
    run_stage("report", diagnostics_hash(), {out_path}, config_.global_seed, [&] {
        std::vector<fs::path> csvs;
        for (const auto& entry : fs::directory_iterator(results_dir()))
            if (entry.path().extension() == ".csv") csvs.push_back(entry.path());
        std::sort(csvs.begin(), csvs.end());

        auto out = open_out(out_path);
        out << "# Experiment report\n\n"
            << "config hash: `" << hash_hex(hashed_text(config_)) << "`\n\n"
            << "## Configuration\n\n```ini\n" << config_.to_text() << "```\n";
        for (const auto& path : csvs) {
            const std::string name = path.filename().string();
            std::ifstream in(path);
            std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            out << "\n## " << name << "\n\n";
            // Per-step series are long; list them instead of inlining.
            if (name.starts_with("prediction_") || name.starts_with("alpha_trace_")) {
                out << std::count(body.begin(), body.end(), '\n') - 1 << " rows (per-step series, not inlined)\n";
                continue;
            }
            out << "```csv\n" << body << "```\n";
        }
        std::ifstream manifest(manifest_path());
        std::string body((std::istreambuf_iterator<char>(manifest)), std::istreambuf_iterator<char>());
        out << "\n## manifest.json\n\n```json\n" << body << "```\n";
    });
}

void Pipeline::run_all()
{
    generate();
    train();
    evaluate();
    alpha();
    sweep();
    impulse();
    report();
}

}  // namespace mglstm
