#include "mglstm/diagnostics.hpp"
#include "mglstm/error.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace mglstm;

namespace {

Trajectory clean_segment(std::size_t samples)
{
    MgConfig mg;
    mg.t_end = mg.transient + static_cast<double>(samples) - 1;
    return integrate_mg(mg);
}

Model small_model(std::uint64_t seed, const Trajectory& t)
{
    Model m;
    m.params = testing::random_params(4, seed, 0.7);
    m.scaler = fit_scaler(t.values);
    m.nu = t.nu;
    return m;
}

StepTrace trace_of(Eigen::VectorXd rec, Eigen::VectorXd data)
{
    StepTrace t;
    t.wh_h = std::move(rec);
    t.wy_y = std::move(data);
    return t;
}

}  // namespace

TEST_CASE("nrmse")
{
    const std::vector<double> truth{0.5, 1.0, 1.2, 0.7};
    CHECK(nrmse(truth, truth, 0.3) == 0.0);
    std::vector<double> shifted = truth;
    for (double& x : shifted) x += 0.3;
    CHECK(nrmse(shifted, truth, 0.3) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(nrmse(std::vector<double>{1.0}, truth, 1.0), LengthMismatch);
}

TEST_CASE("zeroth-order predictor")
{
    CHECK(zeroth_order(std::vector<double>{1, 2, 3}) == std::vector<double>{1, 2});
    CHECK_THROWS_AS(zeroth_order(std::vector<double>{1}), LengthMismatch);

    const Trajectory t = clean_segment(10000);
    // Noiseless: the error is the RMS one-step change of the signal over nu.
    double ss = 0;
    for (std::size_t k = 1; k < t.size(); ++k) ss += (t.values[k] - t.values[k - 1]) * (t.values[k] - t.values[k - 1]);
    const double direct = std::sqrt(ss / (t.size() - 1)) / t.nu;
    CHECK(zeroth_order_nrmse(t.values, t.values, t.nu) == doctest::Approx(direct).epsilon(1e-13));

    auto src = std::make_shared<const Trajectory>(t);
    const double e02 = zeroth_order_nrmse(add_noise(src, 0.02, 1).values, t.values, t.nu);
    const double e64 = zeroth_order_nrmse(add_noise(src, 0.64, 2).values, t.values, t.nu);
    MESSAGE("zeroth-order e_mu: sigma=0 " << direct << ", 0.02 " << e02 << ", 0.64 " << e64);
    CHECK(e02 == doctest::Approx(0.147).epsilon(0.1));
    CHECK(e64 == doctest::Approx(0.658).epsilon(0.05));
}

TEST_CASE("sequential prediction")
{
    const Trajectory t = clean_segment(400);

    SUBCASE("all-zero model predicts the scaler midpoint")
    {
        Model m;
        m.params = LstmParams::zeros(3);
        m.scaler = fit_scaler(t.values);
        m.nu = t.nu;
        const PredictionRun run = sequential_predict(m, t.values, t.values);
        for (double p : run.preds) CHECK(p == m.scaler.invert(0.0));
    }
    SUBCASE("matches a step-by-step loop fed with observations")
    {
        const Model m = small_model(3, t);
        const PredictionRun run = sequential_predict(m, t.values, {}, {true, true});
        REQUIRE(run.preds.size() == t.size());
        REQUIRE(run.traces.size() == t.size());
        REQUIRE(run.states.size() == t.size());
        const oracle::Params q(m.params);
        oracle::Vec s(4, 0.0), h(4, 0.0);
        for (std::size_t k = 0; k < t.size(); ++k) {
            const auto o = oracle::step(q, s, h, m.scaler.apply(t.values[k]));
            CHECK(run.preds[k] == doctest::Approx(m.scaler.invert(o.y_hat)).epsilon(1e-12));
            s = o.s;
            h = o.h;
        }
        CHECK(run.states.back().h[0] == doctest::Approx(h[0]).epsilon(1e-12));
    }
    SUBCASE("runs are deterministic")
    {
        const Model m = small_model(4, t);
        CHECK(sequential_predict(m, t.values).preds == sequential_predict(m, t.values).preds);
    }
    SUBCASE("inputs far outside the scaler range raise the warning flag")
    {
        const Model m = small_model(5, t);
        CHECK_FALSE(sequential_predict(m, t.values).scaler_warning);
        std::vector<double> off = t.values;
        off[10] = m.scaler.max() + 4 * m.nu;
        CHECK(sequential_predict(m, off).scaler_warning);
    }
    SUBCASE("one-step NRMSE aligns predictions with the next truth value")
    {
        const Model m = small_model(6, t);
        const PredictionRun run = sequential_predict(m, t.values, t.values);
        const std::vector<double> p(run.preds.begin() + 5, run.preds.end() - 1);
        const std::vector<double> y(t.values.begin() + 6, t.values.end());
        CHECK(one_step_nrmse(run, t.nu, 5) == nrmse(p, y, t.nu));
    }
}

TEST_CASE("scaler fitted on training data is reused for evaluation")
{
    const Trajectory t = clean_segment(3000);
    auto src = std::make_shared<const Trajectory>(t);
    const NoisySeries noisy = add_noise(src, 0.32, 9);
    Model m = small_model(7, t);
    m.scaler = fit_scaler(std::span(t.values).first(1500));
    const double with_training_scaler = one_step_nrmse(sequential_predict(m, noisy.values, t.values), t.nu);
    Model refit = m;
    refit.scaler = fit_scaler(noisy);
    const double with_refit = one_step_nrmse(sequential_predict(refit, noisy.values, t.values), t.nu);
    CHECK(with_training_scaler != with_refit);
}

TEST_CASE("contribution ratio")
{
    SUBCASE("hand-built traces")
    {
        const std::vector<StepTrace> traces{trace_of(Eigen::Vector2d(1, -1), Eigen::Vector2d(1, 1)),
                                            trace_of(Eigen::Vector2d(-3, 1), Eigen::Vector2d(1, -3))};
        const AlphaResult a = contribution_alpha(traces);
        // (0.5 + 0.5 + 0.75 + 0.25) / 4
        CHECK(a.alpha == 0.5);
        CHECK(a.ratio == 1.0);
        CHECK(a.terms == 4);
        CHECK(a.skipped == 0);
        CHECK(a.per_step == std::vector<double>{0.5, 0.5});
    }
    SUBCASE("no data path means alpha = 1 and an overflowing ratio")
    {
        const Trajectory t = clean_segment(200);
        Model m = small_model(8, t);
        m.params.w_y.setZero();
        const AlphaResult a = contribution_alpha(sequential_predict(m, t.values, {}, {false, true}), 1);
        CHECK(a.alpha == 1.0);
        CHECK(a.ratio_overflow);
        CHECK(std::isinf(a.ratio));
    }
    SUBCASE("zero recurrent drive means alpha = 0")
    {
        const std::vector<StepTrace> traces{trace_of(Eigen::Vector3d::Zero(), Eigen::Vector3d(0.1, -0.2, 0.3))};
        CHECK(contribution_alpha(traces).alpha == 0.0);
        // The first step of any run starts from h = 0.
        const Trajectory t = clean_segment(50);
        const PredictionRun run = sequential_predict(small_model(2, t), t.values, {}, {false, true});
        CHECK(contribution_alpha(std::span(run.traces).first(1)).alpha == 0.0);
    }
    SUBCASE("zero denominators are skipped and counted")
    {
        const std::vector<StepTrace> traces{trace_of(Eigen::Vector2d(0, 2), Eigen::Vector2d(0, 2))};
        const AlphaResult a = contribution_alpha(traces);
        CHECK(a.skipped == 1);
        CHECK(a.terms == 1);
        CHECK(a.alpha == 0.5);
        const std::vector<StepTrace> empty{trace_of(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero())};
        CHECK_THROWS_AS(contribution_alpha(empty), UndefinedAlpha);
    }
    SUBCASE("every term and the mean lie in [0, 1]")
    {
        const Trajectory t = clean_segment(300);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const PredictionRun run = sequential_predict(small_model(seed, t), t.values, {}, {false, true});
            const AlphaResult a = contribution_alpha(run);
            CHECK(a.alpha >= 0.0);
            CHECK(a.alpha <= 1.0);
            for (double s : a.per_step) {
                CHECK(s >= 0.0);
                CHECK(s <= 1.0);
            }
            CHECK(a.ratio == doctest::Approx(a.alpha / (1 - a.alpha)));
        }
    }
}

TEST_CASE("relaxation timescale")
{
    SUBCASE("a single-step excursion gives one time unit")
    {
        std::vector<double> e(150, 0.1);
        e[0] = 0.9;
        CHECK(relaxation_timescale(e, 0.1) == 1.0);
        CHECK(relaxation_timescale(e, 0.1, 0.5) == 0.5);
    }
    SUBCASE("geometric decay matches the closed-form sum")
    {
        const double e_mu = 0.05, e_0 = 1.3, r = 0.8;
        std::vector<double> e(150);
        for (int n = 0; n < 150; ++n) e[n] = e_mu + (e_0 - e_mu) * std::pow(r, n);
        const double closed = (1 - std::pow(r, 150)) / (1 - r);
        CHECK(std::abs(relaxation_timescale(e, e_mu) - closed) < 1e-9);
        CHECK(closed == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("bounded by one and by the window for monotone decay")
    {
        rng::Generator g(4);
        for (int trial = 0; trial < 50; ++trial) {
            const double e_mu = g.uniform(0.0, 0.2);
            std::vector<double> e(150);
            e[0] = e_mu + g.uniform(0.1, 2.0);
            for (int n = 1; n < 150; ++n) e[n] = e_mu + (e[n - 1] - e_mu) * g.uniform(0.0, 1.0);
            const double lambda = relaxation_timescale(e, e_mu);
            CHECK(lambda >= 1.0);
            CHECK(lambda <= 150.0);
        }
    }
    SUBCASE("no excursion is degenerate")
    {
        CHECK_THROWS_AS(relaxation_timescale(std::vector<double>{0.1, 0.2}, 0.1), DegenerateRelaxation);
        CHECK_THROWS_AS(relaxation_timescale(std::vector<double>{0.05, 0.2}, 0.1), DegenerateRelaxation);
    }
}

TEST_CASE("impulse experiment")
{
    const ImpulseSettings settings{150, 1.0, 8};
    REQUIRE(impulse_required_length(settings) == 9 * 150 + 1);
    const Trajectory t = clean_segment(impulse_required_length(settings) + 20);

    SUBCASE("a model that ignores its input cannot be perturbed")
    {
        Model m = small_model(11, t);
        m.params.w_y.setZero();
        CHECK_THROWS_AS(impulse_experiment(m, t, settings), DegenerateRelaxation);
    }
    SUBCASE("profile matches a direct evaluation of the protocol")
    {
        // Near-identity single cell with a little memory.
        Model m = small_model(12, t);
        m.params = LstmParams::zeros(1, Candidate::Tanh);
        m.params.w_y(0) = 1.0;
        m.params.w_h(0, 0) = 0.3;
        m.params.b_i(0) = 10.0;
        m.params.b_o(0) = 10.0;
        m.params.b_f(0) = -2.0;
        m.params.w_s(0, 0) = 1.0;
        m.params.w_y1(0, 0) = 1.0;
        m.params.w_y2(0, 0) = 1.3;
        const ImpulseSettings big{150, 5.0, 8};
        const ImpulseResult r = impulse_experiment(m, t, big);
        REQUIRE(r.e_n.size() == 150);
        CHECK(r.n_ensembles == 8);
        for (double e : r.e_n) CHECK(e >= 0.0);
        CHECK(r.e_0 == r.e_n[0]);
        CHECK(r.lambda == relaxation_timescale(r.e_n, r.e_mu_baseline));

        // Brute force: the kicked run differs from the clean run only by the
        // kicks, so rebuild it with the scalar oracle.
        const oracle::Params q(m.params);
        oracle::Vec s(1, 0.0), h(1, 0.0);
        std::vector<double> sq(150, 0.0);
        double base_sq = 0.0;
        oracle::Vec bs(1, 0.0), bh(1, 0.0);
        for (std::size_t k = 0; k < 9 * 150; ++k) {
            const double x = m.scaler.apply(t.values[k]);
            const bool kick = k >= 150 && k % 150 == 0;
            const auto o = oracle::step(q, s, h, x + (kick ? 5.0 : 0.0));
            const auto b = oracle::step(q, bs, bh, x);
            if (k >= 150) {
                const double err = t.values[k + 1] - m.scaler.invert(o.y_hat);
                const double berr = t.values[k + 1] - m.scaler.invert(b.y_hat);
                sq[k % 150] += err * err;
                base_sq += berr * berr;
            }
            s = o.s;
            h = o.h;
            bs = b.s;
            bh = b.h;
        }
        for (int n = 0; n < 150; ++n) CHECK(r.e_n[n] == doctest::Approx(std::sqrt(sq[n] / 8) / t.nu).epsilon(1e-9));
        CHECK(r.e_mu_baseline == doctest::Approx(std::sqrt(base_sq / (8 * 150)) / t.nu).epsilon(1e-9));
        CHECK(r.e_0_impulse == doctest::Approx(r.e_0 * t.nu / (5.0 * m.scaler.span())).epsilon(1e-14));
    }
    SUBCASE("too little clean data is rejected")
    {
        CHECK_THROWS_AS(impulse_experiment(small_model(1, t), t.segment(0, 500), settings), LengthMismatch);
    }
}

TEST_CASE("noise sweep")
{
    const Trajectory t = clean_segment(1200);
    std::vector<Model> models{small_model(1, t), small_model(2, t)};
    models[0].train_sigma = 0.0;
    models[1].train_sigma = 0.64;
    const std::vector<double> sigmas{0.0, 0.16, 0.64};
    const SweepTable table = noise_sweep(models, t, sigmas, 42, 50);
    REQUIRE(table.e_mu.size() == 2);
    REQUIRE(table.e_mu[0].size() == 3);
    CHECK(table.train_sigmas == std::vector<double>{0.0, 0.64});
    CHECK(table.zeroth_order.size() == 3);
    CHECK(table.zeroth_order[0] < table.zeroth_order[2]);

    // Cell (1, 2) equals a direct evaluation with the cell's own seed.
    auto src = std::make_shared<const Trajectory>(t);
    const NoisySeries noisy = add_noise(src, 0.64, sweep_seed(42, 0.64, 0.64));
    CHECK(table.e_mu[1][2] == one_step_nrmse(sequential_predict(models[1], noisy.values, t.values), t.nu, 50));
    CHECK(sweep_seed(42, 0.0, 0.64) != sweep_seed(42, 0.64, 0.64));
    CHECK(noise_sweep(models, t, sigmas, 42, 50).e_mu == table.e_mu);
}
