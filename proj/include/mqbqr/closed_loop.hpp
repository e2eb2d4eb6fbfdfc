#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mqbqr/control.hpp"
#include "mqbqr/simulator.hpp"

namespace mqbqr {

// Parameter change applied from time t onward.
struct ProfileStep {
    double t = 0.0;
    std::optional<double> R;
    std::optional<double> Vpv;
};

using Controller = std::variant<PidController, AnfisController>;

struct ClosedLoopMetrics {
    bool settled = false;
    double settling_time = 0.0;   // s, to the +/- band around Vref
    double overshoot_pct = 0.0;
    double steady_state_error = 0.0;  // |Vref - mean Vo| over the final window, V
    double final_max_error = 0.0;     // max |Vref - Vo| over the final window, V
};

struct ClosedLoopResult {
    std::vector<double> t;     // cycle start times
    std::vector<double> Vo;    // output voltage sampled at cycle start
    std::vector<double> duty;  // duty applied during the cycle
    std::vector<double> e;     // Vref - Vo
    ClosedLoopMetrics metrics;
    StateVector x_final = StateVector::Zero();
};

struct ClosedLoopOptions {
    double band = 0.02;            // settling band, fraction of Vref
    double final_window = 0.1;     // fraction of the run used for steady-state figures
    StateVector x0 = StateVector::Zero();
};

inline ClosedLoopMetrics closed_loop_metrics(const std::vector<double>& t, const std::vector<double>& Vo, double Vref,
                                             double band = 0.02, double final_window = 0.1) {
    ClosedLoopMetrics m;
    const std::size_t n = Vo.size();
    if (n == 0) return m;
    const double tol = band * std::abs(Vref);
    std::size_t last_out = n;
    for (std::size_t k = n; k-- > 0;) {
        if (std::abs(Vo[k] - Vref) > tol) {
            last_out = k;
            break;
        }
    }
    if (last_out == n) {
        m.settled = true;
        m.settling_time = t.front();
    } else if (last_out + 1 < n) {
        m.settled = true;
        m.settling_time = t[last_out + 1];
    } else {
        m.settled = false;
        m.settling_time = t.back();
    }
    double peak = Vo.front();
    for (double v : Vo) peak = std::max(peak, v);
    m.overshoot_pct = std::max(0.0, peak - Vref) / std::abs(Vref) * 100.0;
    const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(final_window * n)));
    double sum = 0.0, worst = 0.0;
    for (std::size_t k = n - w; k < n; ++k) {
        sum += Vo[k];
        worst = std::max(worst, std::abs(Vref - Vo[k]));
    }
    m.steady_state_error = std::abs(Vref - sum / w);
    m.final_max_error = worst;
    return m;
}

inline double controller_step(Controller& c, double e, double dt) {
    return std::visit(
        [&](auto& ctrl) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(ctrl)>, PidController>) return pid_step(ctrl, e, dt);
            else return anfis_step(ctrl, e, dt);
        },
        c);
}

inline std::pair<double, double> controller_clamp(const Controller& c) {
    return std::visit([](const auto& ctrl) { return std::pair{ctrl.D_min, ctrl.D_max}; }, c);
}

// One control update per switching cycle; duty held for the whole cycle.
inline ClosedLoopResult closed_loop_simulate(const ConverterParams& params, ModelVariant variant, Controller controller,
                                             double Vref, const std::vector<ProfileStep>& profile, double horizon,
                                             const ClosedLoopOptions& opt = {}) {
    require_valid(params);
    if (!(horizon > 0.0)) throw DomainError("closed_loop_simulate: horizon must be > 0");
    const double Ts = params.Ts();
    const long cycles = static_cast<long>(std::ceil(horizon / Ts - 1e-9));
    ConverterParams p = params;
    std::vector<ProfileStep> steps = profile;
    std::stable_sort(steps.begin(), steps.end(), [](const ProfileStep& a, const ProfileStep& b) { return a.t < b.t; });
    std::size_t next_step = 0;

    ClosedLoopResult res;
    res.t.reserve(cycles);
    res.Vo.reserve(cycles);
    res.duty.reserve(cycles);
    res.e.reserve(cycles);
    StateVector x = opt.x0;
    for (long k = 0; k < cycles; ++k) {
        const double t = k * Ts;
        while (next_step < steps.size() && steps[next_step].t <= t + 1e-15) {
            if (steps[next_step].R) p.R = *steps[next_step].R;
            if (steps[next_step].Vpv) p.Vpv = *steps[next_step].Vpv;
            ++next_step;
        }
        const double Vo = x(vCo);
        const double e = Vref - Vo;
        const double d = controller_step(controller, e, Ts);
        p.D = d;
        const PhaseModel on = build_phase_model(p, SwitchPhase::On, variant);
        const PhaseModel off = build_phase_model(p, SwitchPhase::Off, variant);
        const SourceInputs u = nominal_inputs(p);
        const StateVector mid = exact_phase_map(on, u, d * Ts)(x);
        if (!mid.allFinite())
            throw DivergedError("closed loop diverged during the on phase at t=" + csv::number(t), "on", t);
        const StateVector next = exact_phase_map(off, u, (1.0 - d) * Ts)(mid);
        if (!next.allFinite())
            throw DivergedError("closed loop diverged during the off phase at t=" + csv::number(t), "off", t);
        res.t.push_back(t);
        res.Vo.push_back(Vo);
        res.duty.push_back(d);
        res.e.push_back(e);
        x = next;
    }
    res.x_final = x;
    res.metrics = closed_loop_metrics(res.t, res.Vo, Vref, opt.band, opt.final_window);
    return res;
}

inline void write_closed_loop_csv(std::ostream& os, const ClosedLoopResult& r, int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"t", "Vo", "duty", "e"});
    for (std::size_t k = 0; k < r.t.size(); ++k) w.cell(r.t[k]).cell(r.Vo[k]).cell(r.duty[k]).cell(r.e[k]).end_row();
}

// ---------------------------------------------------------------------------
// Training data from PID runs

struct TrainingScenario {
    double Vref = 52.0;
    double horizon = 0.5;
    std::vector<ProfileStep> profile;
    std::optional<double> start_duty;  // start from the open-loop orbit at this duty; zero state otherwise
};

struct TrainingSet {
    std::vector<TrainingSample> samples;
    std::vector<std::string> warnings;
};

inline TrainingSet build_training_set(const ConverterParams& params, ModelVariant variant, const PidController& pid,
                                      const std::vector<TrainingScenario>& scenarios, std::uint64_t seed,
                                      std::size_t samples_per_scenario = 2000) {
    TrainingSet out;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const auto& sc = scenarios[s];
        ClosedLoopOptions opt;
        try {
            if (sc.start_duty) {
                ConverterParams q = params;
                q.D = *sc.start_duty;
                opt.x0 = find_steady_state(q, variant, nominal_inputs(q)).x_periodic;
            }
            PidController c = pid;
            c.reset();
            const auto run = closed_loop_simulate(params, variant, c, sc.Vref, sc.profile, sc.horizon, opt);
            const std::size_t n = run.t.size();
            std::vector<std::size_t> idx(n);
            for (std::size_t k = 0; k < n; ++k) idx[k] = k;
            std::mt19937_64 rng(seed + s);
            if (samples_per_scenario < n) {
                std::shuffle(idx.begin(), idx.end(), rng);
                idx.resize(samples_per_scenario);
                std::sort(idx.begin(), idx.end());
            }
            for (std::size_t k : idx) {
                const double de = k > 0 ? run.e[k] - run.e[k - 1] : 0.0;
                out.samples.push_back({run.e[k], de, run.duty[k]});
            }
        } catch (const Error& err) {
            out.warnings.push_back("scenario " + std::to_string(s) + " skipped: " + err.what());
        }
    }
    return out;
}

}  // namespace mqbqr
