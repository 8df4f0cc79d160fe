// mglstm: command-line driver for the Mackey-Glass / LSTM noise study.
//
//   mglstm <subcommand> [--config <path>] [--preset desk|paper] [--sigma <v>] [--out <dir>]
//
// Exit code 0 on success. On failure a single line `error: <class>: <message>`
// is written to stderr and the exit code is 1 (2 for usage errors).

#include "mglstm/diagnostics.hpp"
#include "mglstm/error.hpp"
#include "mglstm/experiment.hpp"
#include "mglstm/text_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mglstm;

namespace {

struct Options {
    std::string config_path;
    std::string preset_name = "desk";
    std::optional<double> sigma;
    std::string out_dir;
    int jobs = -1;
    // Ad-hoc single-model mode.
    std::string model_path;
    std::string input_path;
    std::string output_path;
};

ExperimentConfig effective_config(const Options& o)
{
    ExperimentConfig c = preset(o.preset_name);
    if (!o.config_path.empty()) c = load_config(o.config_path, c);
    if (!o.out_dir.empty()) c.output_dir = o.out_dir;
    if (o.jobs >= 0) c.jobs = o.jobs;
    return c;
}

std::ostream& output_stream(const Options& o, std::ofstream& file)
{
    if (o.output_path.empty()) return std::cout;
    file.open(o.output_path);
    if (!file) throw MissingArtifact("cannot open for writing: " + o.output_path);
    return file;
}

bool ad_hoc(const Options& o, const char* what)
{
    if (o.model_path.empty() && o.input_path.empty()) return false;
    if (o.model_path.empty() || o.input_path.empty())
        throw ConfigError(std::string(what) + ": --model and --input must be given together");
    return true;
}

void alpha_ad_hoc(const Options& o, const ExperimentConfig& c)
{
    const Model model = load_model_path(o.model_path);
    const NoisySeries input = read_dataset_csv(o.input_path);
    const PredictionRun run = sequential_predict(model, input.values, {}, {false, true});
    if (run.scaler_warning) std::cerr << "warning: input exceeds the model scaler range by more than 3 nu\n";
    std::ofstream file;
    std::ostream& out = output_stream(o, file);
    write_alpha_row_header(out);
    write_alpha_row(out, model.train_sigma, contribution_alpha(run, std::min(c.washout, run.traces.size() - 1)));
}

void evaluate_ad_hoc(const Options& o, const ExperimentConfig& c)
{
    const Model model = load_model_path(o.model_path);
    const NoisySeries input = read_dataset_csv(o.input_path);
    const Trajectory& truth = *input.source;
    const PredictionRun run = sequential_predict(model, input.values, truth.values);
    if (run.scaler_warning) std::cerr << "warning: input exceeds the model scaler range by more than 3 nu\n";
    std::ofstream file;
    std::ostream& out = output_stream(o, file);
    out << "train_sigma,input_sigma,e_mu,e_mu_zeroth\n"
        << format_tag(model.train_sigma) << ',' << format_tag(input.sigma) << ','
        << format_double(one_step_nrmse(run, truth.nu, c.washout)) << ','
        << format_double(zeroth_order_nrmse(input.values, truth.values, truth.nu, c.washout)) << '\n';
}

void impulse_ad_hoc(const Options& o, const ExperimentConfig& c)
{
    const Model model = load_model_path(o.model_path);
    const NoisySeries input = read_dataset_csv(o.input_path);
    if (input.sigma != 0.0) throw ConfigError("impulse: --input must be a noiseless series (sigma = 0)");
    const ImpulseResult r = impulse_experiment(model, *input.source, c.impulse);
    std::ofstream file;
    std::ostream& out = output_stream(o, file);
    out << "# sigma=" << format_tag(model.train_sigma) << " e_0=" << format_double(r.e_0)
        << " lambda=" << format_double(r.lambda) << " e_0_impulse=" << format_double(r.e_0_impulse)
        << " e_mu=" << format_double(r.e_mu_baseline) << '\n'
        << "n,e_n\n";
    for (std::size_t n = 0; n < r.e_n.size(); ++n) out << n << ',' << format_double(r.e_n[n]) << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mackey-Glass LSTM noise-robustness toolkit"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Experiment config file (INI-style)")->check(CLI::ExistingFile);
        sub->add_option("--preset", o.preset_name, "Base preset")->check(CLI::IsMember({"desk", "paper"}));
        sub->add_option("--out", o.out_dir, "Output directory (overrides experiment.output_dir)");
    };
    auto single_model = [&o](CLI::App* sub) {
        sub->add_option("--model", o.model_path, "Model file or model directory");
        sub->add_option("--input", o.input_path, "Dataset CSV (t,mu,y)");
        sub->add_option("--output", o.output_path, "Write the result here instead of stdout");
    };

    auto* run = app.add_subcommand("run", "Run every stage");
    auto* generate = app.add_subcommand("generate", "Integrate Mackey-Glass and write clean and noisy datasets");
    auto* train = app.add_subcommand("train", "Train one model per noise level");
    auto* evaluate = app.add_subcommand("evaluate", "One-step prediction error on each model's own noise level");
    auto* impulse = app.add_subcommand("impulse", "Periodic impulse experiment and relaxation timescale");
    auto* alpha = app.add_subcommand("alpha", "Recurrent-vs-data contribution ratio");
    auto* sweep = app.add_subcommand("sweep", "NRMSE of every model across evaluation noise levels");
    auto* report = app.add_subcommand("report", "Collect results and manifest into results/report.md");
    auto* show = app.add_subcommand("show-config", "Print the effective configuration");
    for (auto* sub : {run, generate, train, evaluate, impulse, alpha, sweep, report, show}) common(sub);
    for (auto* sub : {run, train}) sub->add_option("--jobs", o.jobs, "Parallel training runs (0 = all cores)");
    train->add_option("--sigma", o.sigma, "Train only this noise level");
    for (auto* sub : {evaluate, impulse, alpha}) single_model(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig config = effective_config(o);
        auto* sub = app.get_subcommands().front();
        if (sub == show) {
            config.validate();
            std::cout << config.to_text();
            return 0;
        }
        if (sub == alpha && ad_hoc(o, "alpha")) return alpha_ad_hoc(o, config), 0;
        if (sub == evaluate && ad_hoc(o, "evaluate")) return evaluate_ad_hoc(o, config), 0;
        if (sub == impulse && ad_hoc(o, "impulse")) return impulse_ad_hoc(o, config), 0;

        Pipeline pipeline(config, &std::cerr);
        if (sub == run) pipeline.run_all();
        else if (sub == generate) pipeline.generate();
        else if (sub == train) pipeline.train(o.sigma);
        else if (sub == evaluate) pipeline.evaluate();
        else if (sub == impulse) pipeline.impulse();
        else if (sub == alpha) pipeline.alpha();
        else if (sub == sweep) pipeline.sweep();
        else if (sub == report) pipeline.report();
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
    }
    return 1;
}
