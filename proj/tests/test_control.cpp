#include <random>
#include <sstream>

#include <catch_amalgamated.hpp>

#include "mqbqr/closed_loop.hpp"
#include "mqbqr/control.hpp"
#include "mqbqr/pv.hpp"

using namespace mqbqr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ConverterParams preset() {
    ConverterParams p;
    p.parasitics.RL_copper = 2.0;
    return p;
}

PidController tuned_pid() {
    PidController c;
    c.Kp = 0.002;
    c.Ki = 0.05;
    c.Kd = 0.0;
    c.bias = 0.3;
    c.D_min = 0.05;
    c.D_max = 0.9;
    return c;
}

std::vector<AnfisPoint> random_points(std::uint64_t seed, int n, double spread = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spread, spread);
    std::vector<AnfisPoint> pts;
    for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng), 0.0});
    return pts;
}

AnfisModel perturbed_model(std::uint64_t seed) {
    AnfisModel m = make_anfis(3, 0.4);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (auto& r : m.rules) {
        r.p += u(rng);
        r.q += u(rng);
        r.r += u(rng);
    }
    for (auto* mfs : {&m.mf1, &m.mf2})
        for (auto& mf : *mfs) {
            mf.left += u(rng);
            mf.peak += u(rng);
            mf.right += u(rng);
        }
    project_anfis(m);
    return m;
}

std::vector<TrainingScenario> shipped_scenarios() {
    return {
        {52.0, 1.0, {}, std::nullopt},
        {52.0, 1.0, {}, 0.4},
        {52.0, 1.0, {}, 0.25},
        {52.0, 1.0, {{0.5, 500.0, std::nullopt}}, std::nullopt},
    };
}

}  // namespace

TEST_CASE("pid step", "[control]") {
    SECTION("zero error history gives a constant output") {
        PidController c;
        c.Kp = 0.1;
        c.Ki = 3.0;
        c.Kd = 1e-4;
        for (int i = 0; i < 5; ++i) CHECK(pid_step(c, 0.0, 2e-5) == 0.4);
    }
    SECTION("proportional only") {
        PidController c;
        c.Kp = 0.1;
        CHECK_THAT(pid_step(c, 1.0, 2e-5), WithinAbs(0.5, 1e-15));
    }
    SECTION("saturation freezes the integrator") {
        PidController c;
        c.Kp = 0.1;
        c.Ki = 10.0;
        const double dt = 1e-3;
        // step 1: trial = 0.4 + 100 + 10 * 1 > D_max, integrator stays 0
        CHECK(pid_step(c, 1000.0, dt) == c.D_max);
        CHECK(c.integrator == 0.0);
        CHECK(pid_step(c, 1000.0, dt) == c.D_max);
        CHECK(c.integrator == 0.0);
        // step 3: trial = 0.4 + 0.01 + 10 * 1e-4 = 0.411, inside the clamp, integrator advances
        CHECK_THAT(pid_step(c, 0.1, dt), WithinAbs(0.411, 1e-12));
        CHECK_THAT(c.integrator, WithinAbs(1e-4, 1e-18));
    }
    SECTION("invalid dt") {
        PidController c;
        CHECK_THROWS_AS(pid_step(c, 1.0, 0.0), DomainError);
    }
}

TEST_CASE("anfis inference", "[control]") {
    SECTION("single rule is the linear consequent") {
        AnfisModel m = make_anfis(1, 0.4);
        m.rules[0] = {0.03, -0.02, 0.45};
        for (auto [x1, x2] : {std::pair{0.3, -0.7}, std::pair{-0.9, 0.2}, std::pair{0.0, 0.0}})
            CHECK_THAT(anfis_infer(m, x1, x2), WithinAbs(0.03 * x1 - 0.02 * x2 + 0.45, 1e-15));
    }
    SECTION("symmetric fan with antisymmetric consequents returns the nominal duty at the origin") {
        AnfisModel m = make_anfis(5, 0.4);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) m.rules[i * 5 + j] = {0.01 * (i - 2), 0.02 * (j - 2), 0.4};
        CHECK_THAT(anfis_infer(m, 0.0, 0.0), WithinAbs(0.4, 1e-15));
    }
    SECTION("normalised strengths sum to one") {
        const AnfisModel m = perturbed_model(3);
        for (const auto& pt : random_points(9, 100)) {
            const auto L = anfis_forward(m, pt.x1, pt.x2);
            double s = 0.0;
            for (double w : L.wbar) s += w;
            CHECK_THAT(s, WithinAbs(1.0, 1e-12));
        }
    }
    SECTION("continuity") {
        const AnfisModel m = perturbed_model(4);
        for (const auto& pt : random_points(10, 100, 0.99)) {
            const double a = anfis_infer(m, pt.x1, pt.x2);
            const double b = anfis_infer(m, pt.x1 + 1e-6, pt.x2 - 1e-6);
            CHECK(std::abs(a - b) < 1e-6);
        }
    }
    SECTION("no firing rule") {
        AnfisModel m = make_anfis(3, 0.4);
        CHECK_THROWS_AS(anfis_forward(m, 5.0, 0.0), CoverageError);
    }
    SECTION("membership functions are ordered and cover the range") {
        const AnfisModel m = make_anfis(5);
        for (const auto& mf : m.mf1) CHECK((mf.left <= mf.peak && mf.peak <= mf.right));
        for (double x = -1.0; x <= 1.0; x += 0.01) {
            double s = 0.0;
            for (const auto& mf : m.mf1) s += mf(x);
            CHECK(s > 0.0);
        }
    }
}

TEST_CASE("anfis training", "[control]") {
    auto pts = random_points(42, 200, 0.5);
    for (auto& p : pts) p.target = 0.4 + 0.05 * p.x1;

    SECTION("zero epochs") {
        const AnfisModel m = perturbed_model(1);
        const auto r = anfis_train(m, pts, 0, 0.5);
        CHECK(r.rmse_history.empty());
        CHECK(anfis_parameters(r.model) == anfis_parameters(m));
    }
    SECTION("linear target") {
        const auto r = anfis_train(make_anfis(5, 0.4), pts, 200, 0.5);
        REQUIRE(r.rmse_history.size() == 200);
        CHECK(r.rmse_history.back() < 1e-3);
    }
    SECTION("vanishing learning rate leaves the parameters unchanged to first order") {
        const AnfisModel m = perturbed_model(2);
        const auto r = anfis_train(m, pts, 1, 1e-12);
        const auto a = anfis_parameters(m), b = anfis_parameters(r.model);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-10);
    }
    SECTION("errors") {
        CHECK_THROWS_AS(anfis_train(make_anfis(), {}, 10, 0.5), DomainError);
        CHECK_THROWS_AS(anfis_train(make_anfis(), pts, 10, 0.0), DomainError);
    }
}

TEST_CASE("anfis gradient against central differences", "[control]") {
    const AnfisModel m = perturbed_model(5);
    auto pts = random_points(6, 60, 0.9);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> t(0.2, 0.6);
    for (auto& p : pts) p.target = t(rng);
    const auto g = anfis_gradient(m, pts);
    const auto theta = anfis_parameters(m);
    std::uniform_int_distribution<std::size_t> pick(0, theta.size() - 1);
    int checked = 0;
    while (checked < 10) {
        const std::size_t k = pick(rng);
        if (std::abs(g[k]) < 1e-8) continue;
        const double h = 1e-6;
        AnfisModel a = m, b = m;
        auto ta = theta, tb = theta;
        ta[k] += h;
        tb[k] -= h;
        set_anfis_parameters(a, ta);
        set_anfis_parameters(b, tb);
        const double fd = (anfis_loss(a, pts) - anfis_loss(b, pts)) / (2.0 * h);
        CHECK_THAT(g[k], WithinRel(fd, 1e-4));
        ++checked;
    }
}

TEST_CASE("closed loop", "[control][closed-loop]") {
    const auto p = preset();
    const double dt = p.Ts();

    SECTION("equilibrium hold") {
        const auto ss = find_steady_state(p, ModelVariant::Reconciled, nominal_inputs(p));
        PidController c;
        c.Kp = 0.002;
        c.Ki = 0.05;
        ClosedLoopOptions opt;
        opt.x0 = ss.x_periodic;
        const auto r = closed_loop_simulate(p, ModelVariant::Reconciled, c, ss.x_periodic(vCo), {}, 0.01, opt);
        for (double d : r.duty) CHECK_THAT(d, WithinAbs(0.4, 1e-9));
        CHECK(r.metrics.steady_state_error < 1e-6);
    }

    SECTION("PID regulates the 52 V preset scenario") {
        const auto r = closed_loop_simulate(p, ModelVariant::Reconciled, tuned_pid(), 52.0, {}, 1.0);
        CHECK(r.metrics.final_max_error <= 1.04);
        CHECK(r.metrics.settled);
        for (double d : r.duty) CHECK((d >= 0.05 && d <= 0.9));

        std::ostringstream os;
        write_closed_loop_csv(os, r, 17);
        const auto rows = csv::parse(os.str());
        REQUIRE(rows.size() == r.t.size() + 1);
        std::vector<double> t, vo;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            t.push_back(std::stod(rows[i][0]));
            vo.push_back(std::stod(rows[i][1]));
        }
        const auto m = closed_loop_metrics(t, vo, 52.0);
        CHECK(m.settled == r.metrics.settled);
        CHECK(m.settling_time == r.metrics.settling_time);
        CHECK(m.overshoot_pct == r.metrics.overshoot_pct);
        CHECK(m.steady_state_error == r.metrics.steady_state_error);
        CHECK(m.final_max_error == r.metrics.final_max_error);
    }

    SECTION("ANFIS cloned from the PID regulates the 52 V preset scenario") {
        const auto data = build_training_set(p, ModelVariant::Reconciled, tuned_pid(), shipped_scenarios(), 42, 1000);
        CHECK(data.warnings.empty());
        REQUIRE(data.samples.size() == 4000);
        for (const auto& s : data.samples) CHECK((s.duty >= 0.05 && s.duty <= 0.9));

        AnfisController c;
        c.model = make_anfis(5, 0.3);
        c.D_min = 0.05;
        c.D_max = 0.9;
        const auto pts = to_anfis_points(c, data.samples, dt);
        const auto tr = anfis_train(c.model, pts, 200, 0.5);
        for (std::size_t k = 1; k < tr.rmse_history.size(); ++k)
            CHECK(tr.rmse_history[k] <= tr.rmse_history[k - 1] * (1.0 + 1e-12));
        c.model = tr.model;

        const auto r = closed_loop_simulate(p, ModelVariant::Reconciled, c, 52.0, {}, 1.0);
        CHECK(r.metrics.final_max_error <= 1.04);
        for (double d : r.duty) CHECK((d >= 0.05 && d <= 0.9));
    }

    SECTION("training set is reproducible") {
        std::vector<TrainingScenario> sc = {{52.0, 0.05, {}, std::nullopt}};
        const auto a = build_training_set(p, ModelVariant::Reconciled, tuned_pid(), sc, 7, 300);
        const auto b = build_training_set(p, ModelVariant::Reconciled, tuned_pid(), sc, 7, 300);
        REQUIRE(a.samples.size() == b.samples.size());
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            CHECK(a.samples[i].e == b.samples[i].e);
            CHECK(a.samples[i].de == b.samples[i].de);
            CHECK(a.samples[i].duty == b.samples[i].duty);
        }
        CHECK(build_training_set(p, ModelVariant::Reconciled, tuned_pid(), {}, 7).samples.empty());
    }

    SECTION("failing scenario is skipped with a warning") {
        std::vector<TrainingScenario> bad = {{52.0, 0.01, {}, 0.4}};
        const auto s = build_training_set(p, ModelVariant::PaperLiteral, tuned_pid(), bad, 1, 10);
        CHECK(s.samples.empty());
        CHECK(s.warnings.size() == 1);
    }
}

TEST_CASE("pv panel", "[control][pv]") {
    const PvModel m = fit_pv(PvPanel{});
    CHECK_THAT(pv_operating_point(m, 37.8), WithinAbs(0.0, 1e-9));
    CHECK_THAT(pv_operating_point(m, 0.0), WithinRel(8.3, 1e-12));
    CHECK_THAT(pv_operating_point(m, 36.3), WithinRel(7.35, 0.01));
    CHECK(m.fit_residual < 0.01);
    CHECK_THAT(m.pmax_from_mpp_point, WithinRel(266.805, 1e-12));
    CHECK_FALSE(m.pmax_note.empty());
    CHECK_THROWS_AS(pv_operating_point(m, 38.0), DomainError);
    const auto mpp = pv_mpp(m);
    CHECK(mpp.P >= 36.3 * pv_current(m, 36.3));
    CHECK(mpp.V > 0.0);
    CHECK(mpp.V < 37.8);
}
