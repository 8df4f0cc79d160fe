#include "mglstm/error.hpp"
#include "mglstm/experiment.hpp"
#include "mglstm/text_io.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace mglstm;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const std::string& dir)
{
    ExperimentConfig c = preset("desk");
    c.n_train = 400;
    c.n_test = 200;
    c.sigmas = {0.0, 0.16};
    c.eval_sigmas = {0.0, 0.16};
    c.washout = 10;
    c.train.n_cells = 3;
    c.train.seq_len = 20;
    c.train.n_epochs = 3;
    c.train.batch_size = 2;
    c.checkpoint_every = 20;
    c.impulse = {20, 1.0, 3};
    c.jobs = 1;
    c.output_dir = fs::temp_directory_path() / ("mglstm_test_" + dir);
    fs::remove_all(c.output_dir);
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            files[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
    return files;
}

std::size_t count_run(const Pipeline& p)
{
    std::size_t n = 0;
    for (const auto& r : p.stages()) n += !r.skipped;
    return n;
}

}  // namespace

TEST_CASE("config text round-trips")
{
    ExperimentConfig c = preset("desk");
    c.sigmas = {0.0, 0.04, 0.5};
    c.train.learning_rate = 0.0025;
    c.train.candidate = Candidate::Tanh;
    c.impulse.n_ensembles = 7;
    std::istringstream in(c.to_text());
    const ExperimentConfig back = parse_config(in, preset("paper"));
    CHECK(back.to_text() == c.to_text());
    CHECK(hash_hex(back.to_text()) == hash_hex(c.to_text()));
}

TEST_CASE("config errors")
{
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in, preset("desk"));
    };
    CHECK_THROWS_AS(parse("[train]\nlearning_rat = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[nonsense]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\nn_cells = many\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\ncandidate = relu\n"), ConfigError);
    CHECK(parse("[train]\nn_cells = 8\n").train.n_cells == 8);
    CHECK_THROWS_AS(preset("laptop"), ConfigError);

    ExperimentConfig c = preset("desk");
    c.sigmas = {0.16, 0.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = preset("desk");
    c.n_test = 500;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = preset("desk");
    c.train.n_cells = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(preset("desk").validate());
    CHECK_NOTHROW(preset("paper").validate());
}

TEST_CASE("pipeline produces every artifact and resumes")
{
    const ExperimentConfig config = tiny_config("pipeline");
    const fs::path out = config.output_dir;
    {
        Pipeline p(config);
        p.run_all();
        CHECK(count_run(p) == p.stages().size());
    }
    const fs::path res = out / "results";
    for (const char* f : {"evaluate.csv", "alpha_vs_sigma.csv", "alpha_clean_vs_sigma.csv", "nrmse_sweep.csv",
                          "zeroth_order.csv", "impulse_summary.csv", "report.md", "prediction_0.csv",
                          "prediction_0.16.csv", "alpha_trace_0.csv", "impulse_profile_0.16.csv"})
        CHECK_MESSAGE(fs::exists(res / f), f);
    CHECK(fs::exists(out / "data" / "mg_clean.csv"));
    CHECK(fs::exists(out / "data" / "noisy_0.16.csv"));
    CHECK(fs::exists(out / "models" / "sigma_0" / "model.txt"));
    CHECK(fs::exists(out / "models" / "sigma_0" / "train_log.csv"));
    CHECK(fs::exists(out / "models" / "sigma_0.16" / "checkpoints" / "step_20.txt"));

    CHECK(slurp(res / "evaluate.csv").starts_with("sigma,e_mu,e_mu_zeroth\n"));
    CHECK(slurp(res / "nrmse_sweep.csv").starts_with("train_sigma,eval_sigma,e_mu\n"));
    CHECK(split(slurp(res / "nrmse_sweep.csv"), '\n').size() >= 5);
    CHECK(slurp(res / "prediction_0.csv").starts_with("t,mu,y,y_hat\n"));
    CHECK(slurp(res / "impulse_summary.csv").starts_with("sigma,e_0,lambda,e_0_impulse,e_mu\n"));
    CHECK(slurp(res / "impulse_profile_0.csv").starts_with("n,e_n\n"));

    const std::string report = slurp(res / "report.md");
    CHECK(report.find("## evaluate.csv") != std::string::npos);
    CHECK(report.find("## manifest.json") != std::string::npos);
    CHECK(report.find("learning_rate") != std::string::npos);

    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest.contains("config_hash"));
    for (const char* key : {"generate", "train/sigma_0", "train/sigma_0.16", "evaluate", "alpha", "sweep", "impulse"}) {
        REQUIRE_MESSAGE(manifest["stages"].contains(key), key);
        CHECK(manifest["stages"][key].contains("seed"));
        CHECK(manifest["stages"][key].contains("wall_seconds"));
        CHECK(manifest["stages"][key]["outputs"].size() >= 1);
    }

    const auto before = snapshot(out);

    SUBCASE("an identical rerun skips every stage and changes nothing")
    {
        Pipeline p(config);
        p.run_all();
        CHECK(count_run(p) == 0);
        CHECK(snapshot(out) == before);
    }
    SUBCASE("deleted results are regenerated without retraining")
    {
        fs::remove_all(res);
        Pipeline p(config);
        p.run_all();
        for (const auto& r : p.stages())
            if (r.name.starts_with("train") || r.name == "generate") CHECK_MESSAGE(r.skipped, r.name);
        CHECK(count_run(p) == 5);
        // The report embeds the manifest, whose wall times differ.
        auto after = snapshot(out);
        for (const auto& [name, body] : before) {
            if (name == "results/report.md") continue;
            CHECK_MESSAGE(after[name] == body, name);
        }
    }
    SUBCASE("a changed configuration is refused")
    {
        ExperimentConfig changed = config;
        changed.train.n_epochs = 4;
        Pipeline p(changed);
        CHECK_NOTHROW(p.generate());
        CHECK_THROWS_AS(p.train(), StaleArtifact);
    }
    SUBCASE("training a single noise level")
    {
        fs::remove_all(out / "models" / "sigma_0.16");
        Pipeline p(config);
        p.train(0.16);
        CHECK(count_run(p) == 1);
        CHECK(slurp(out / "models" / "sigma_0.16" / "model.txt") == before.at("models/sigma_0.16/model.txt"));
        CHECK_THROWS_AS(p.train(0.5), ConfigError);
    }
    SUBCASE("loaded models carry their training noise level")
    {
        const auto models = Pipeline(config).load_models();
        REQUIRE(models.size() == 2);
        CHECK(models[1].train_sigma == 0.16);
        CHECK(load_model_path(out / "models" / "sigma_0.16").params.w_h == models[1].params.w_h);
    }
}

TEST_CASE("stages name the missing upstream step")
{
    const ExperimentConfig config = tiny_config("missing");
    Pipeline p(config);
    auto message = [](auto&& fn) {
        try {
            fn();
        } catch (const MissingArtifact& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message([&] { p.train(); }).find("generate") != std::string::npos);
    CHECK(message([&] { p.evaluate(); }).find("generate") != std::string::npos);
    CHECK(message([&] { p.report(); }).find("evaluate") != std::string::npos);
    p.generate();
    CHECK(message([&] { p.alpha(); }).find("train") != std::string::npos);
    CHECK(message([&] { p.impulse(); }).find("train") != std::string::npos);
    fs::remove_all(config.output_dir);
}

TEST_CASE("parallel training gives the same models as sequential training")
{
    ExperimentConfig seq = tiny_config("seq");
    ExperimentConfig par = tiny_config("par");
    par.jobs = 2;
    Pipeline a(seq), b(par);
    a.generate();
    a.train();
    b.generate();
    b.train();
    for (double s : seq.sigmas) CHECK(slurp(a.model_path(s)) == slurp(b.model_path(s)));
    fs::remove_all(seq.output_dir);
    fs::remove_all(par.output_dir);
}
