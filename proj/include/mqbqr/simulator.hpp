#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "mqbqr/converter_model.hpp"
#include "mqbqr/csv.hpp"
#include "mqbqr/formulas.hpp"

namespace mqbqr {

enum class Propagation { ExactExponential, RK4 };

struct SimConfig {
    int steps_per_phase = 64;
    long n_max_cycles = 100000;
    double fp_tol = 1e-9;
    Propagation propagation = Propagation::ExactExponential;
    int rk4_substeps = 16;  // RK4 steps per sample interval
};

inline void require_valid(const SimConfig& c) {
    if (c.steps_per_phase < 4) throw DomainError("SimConfig.steps_per_phase must be >= 4");
    if (!(c.fp_tol > 0.0)) throw DomainError("SimConfig.fp_tol must be > 0");
    if (c.rk4_substeps < 1) throw DomainError("SimConfig.rk4_substeps must be >= 1");
    if (c.n_max_cycles < 0) throw DomainError("SimConfig.n_max_cycles must be >= 0");
}

// x -> Phi x + g
struct AffineMap {
    StateMatrix Phi = StateMatrix::Identity();
    StateVector g = StateVector::Zero();

    StateVector operator()(const StateVector& x) const { return Phi * x + g; }
    AffineMap then(const AffineMap& next) const { return {next.Phi * Phi, next.Phi * g + next.g}; }
};

namespace detail {

inline StateVector rk4_run(const PhaseModel& m, StateVector x, const StateVector& c, double tau, long steps) {
    const double h = tau / static_cast<double>(steps);
    for (long k = 0; k < steps; ++k) {
        const StateVector k1 = m.A * x + c;
        const StateVector k2 = m.A * (x + 0.5 * h * k1) + c;
        const StateVector k3 = m.A * (x + 0.5 * h * k2) + c;
        const StateVector k4 = m.A * (x + h * k3) + c;
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

}  // namespace detail

// Exact map over tau from the exponential of the augmented matrix [A c; 0 0].
inline AffineMap exact_phase_map(const PhaseModel& m, const SourceInputs& u, double tau) {
    if (!(tau >= 0.0)) throw DomainError("phase duration must be >= 0");
    Eigen::Matrix<double, kStates + 1, kStates + 1> M = Eigen::Matrix<double, kStates + 1, kStates + 1>::Zero();
    M.topLeftCorner<kStates, kStates>() = m.A * tau;
    M.topRightCorner<kStates, 1>() = (m.B * u.vec() + m.f) * tau;
    const Eigen::Matrix<double, kStates + 1, kStates + 1> E = M.exp();
    return {E.topLeftCorner<kStates, kStates>(), E.topRightCorner<kStates, 1>()};
}

// Map of `steps` classical RK4 steps (affine, so recovered column by column).
inline AffineMap rk4_phase_map(const PhaseModel& m, const SourceInputs& u, double tau, long steps) {
    if (!(tau >= 0.0)) throw DomainError("phase duration must be >= 0");
    const StateVector c = m.B * u.vec() + m.f;
    AffineMap out;
    out.g = detail::rk4_run(m, StateVector::Zero(), c, tau, steps);
    const StateVector zero_c = StateVector::Zero();
    for (int k = 0; k < kStates; ++k)
        out.Phi.col(k) = detail::rk4_run(m, StateVector::Unit(k), zero_c, tau, steps);
    return out;
}

inline StateVector propagate_phase(const PhaseModel& m, const StateVector& x0, const SourceInputs& u, double tau,
                                   Propagation method = Propagation::ExactExponential, long rk4_steps = 10000) {
    if (!(tau >= 0.0)) throw DomainError("propagate_phase: tau must be >= 0");
    if (tau == 0.0) return x0;
    if (method == Propagation::RK4) return detail::rk4_run(m, x0, m.B * u.vec() + m.f, tau, rk4_steps);
    return exact_phase_map(m, u, tau)(x0);
}

// ---------------------------------------------------------------------------
// Trajectories

struct Trajectory {
    std::vector<double> t;
    std::vector<StateVector> x;
    std::vector<SwitchPhase> phase;  // phase of the interval ending at each sample; t = 0 is labelled On
    int steps_per_phase = 0;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
};

// Switch current: the switch carries L1, L2 and L3 while it conducts.
inline double switch_current(const StateVector& x, SwitchPhase ph) {
    return ph == SwitchPhase::On ? x(iL1) + x(iL2) + x(iL3) : 0.0;
}

// Current of diode k (kDiodeNames order) from inductor currents and the conduction set.
inline double diode_current(int k, const StateVector& x, SwitchPhase ph) {
    if (!conduction_set(ph)[k]) return 0.0;
    switch (k) {
        case 0: return x(iL2);                // D1
        case 1: return x(iL1) + x(iL2);       // D2
        case 2: return x(iL1);                // D3
        case 3: return x(iL3);                // D4
        case 4: return x(iL3);                // D5
        case 5: return x(iL4);                // D6
        case 6: return x(iL4);                // D7
        default: return x(iL4);               // Do
    }
}

// Blocking voltage of diode k while it is reverse biased.
inline double diode_blocking_voltage(int k, const StateVector& x, const SourceInputs& u, const ConverterParams& p,
                                     SwitchPhase ph) {
    if (conduction_set(ph)[k]) return 0.0;
    switch (k) {
        case 0: return x(vC1);
        case 1: return u.v_src - x(vC1);
        case 2: return x(vC1);
        case 3: return x(vC1);
        case 4: return x(vCo) / 2.0;
        case 5: return x(vC2) - p.Vbat;
        case 6: return (p.Vbat - x(vCo)) / 2.0;
        default: return x(vCo);
    }
}

inline double switch_blocking_voltage(const StateVector& x, SwitchPhase ph) {
    return ph == SwitchPhase::Off ? x(vC1) : 0.0;
}

// Precomputed per-phase maps for one (params, variant, u).
class CycleIntegrator {
public:
    CycleIntegrator(const ConverterParams& p, ModelVariant variant, const SourceInputs& u, const SimConfig& cfg = {})
        : params_(p), variant_(variant), u_(u), cfg_(cfg) {
        require_valid(p);
        require_valid(cfg);
        on_ = build_phase_model(p, SwitchPhase::On, variant);
        off_ = build_phase_model(p, SwitchPhase::Off, variant);
        tau_on_ = phase_duration(p, SwitchPhase::On);
        tau_off_ = phase_duration(p, SwitchPhase::Off);
        const int n = cfg.steps_per_phase;
        if (cfg.propagation == Propagation::ExactExponential) {
            full_on_ = exact_phase_map(on_, u, tau_on_);
            full_off_ = exact_phase_map(off_, u, tau_off_);
            step_on_ = exact_phase_map(on_, u, tau_on_ / n);
            step_off_ = exact_phase_map(off_, u, tau_off_ / n);
        } else {
            step_on_ = rk4_phase_map(on_, u, tau_on_ / n, cfg.rk4_substeps);
            step_off_ = rk4_phase_map(off_, u, tau_off_ / n, cfg.rk4_substeps);
            full_on_ = power(step_on_, n);
            full_off_ = power(step_off_, n);
        }
        cycle_ = full_on_.then(full_off_);
    }

    const ConverterParams& params() const { return params_; }
    ModelVariant variant() const { return variant_; }
    const SourceInputs& inputs() const { return u_; }
    const SimConfig& config() const { return cfg_; }
    const PhaseModel& model(SwitchPhase ph) const { return ph == SwitchPhase::On ? on_ : off_; }
    const AffineMap& phase_map(SwitchPhase ph) const { return ph == SwitchPhase::On ? full_on_ : full_off_; }
    const AffineMap& cycle_map() const { return cycle_; }

    // One full cycle without sampling.
    StateVector advance(const StateVector& x0) const {
        const StateVector mid = full_on_(x0);
        if (!mid.allFinite()) throw DivergedError("state became non-finite during the on phase", "on", 0.0);
        const StateVector end = full_off_(mid);
        if (!end.allFinite()) throw DivergedError("state became non-finite during the off phase", "off", tau_on_);
        return end;
    }

    std::pair<StateVector, Trajectory> integrate(const StateVector& x0, double t0 = 0.0) const {
        const int n = cfg_.steps_per_phase;
        Trajectory tr;
        tr.steps_per_phase = n;
        tr.t.reserve(2 * n + 1);
        tr.x.reserve(2 * n + 1);
        tr.phase.reserve(2 * n + 1);
        tr.t.push_back(t0);
        tr.x.push_back(x0);
        tr.phase.push_back(SwitchPhase::On);
        auto run = [&](SwitchPhase ph, const AffineMap& step, const AffineMap& full, double start, double tau) {
            const StateVector begin = tr.x.back();
            StateVector x = begin;
            for (int k = 1; k <= n; ++k) {
                x = (k == n) ? full(begin) : step(x);
                const double t = (k == n) ? start + tau : start + tau * k / n;
                if (!x.allFinite())
                    throw DivergedError(std::string("state became non-finite during the ") + std::string(to_string(ph)) +
                                            " phase",
                                        std::string(to_string(ph)), tr.t.back());
                tr.t.push_back(t);
                tr.x.push_back(x);
                tr.phase.push_back(ph);
            }
        };
        run(SwitchPhase::On, step_on_, full_on_, t0, tau_on_);
        run(SwitchPhase::Off, step_off_, full_off_, t0 + tau_on_, tau_off_);
        return {tr.x.back(), std::move(tr)};
    }

private:
    static AffineMap power(const AffineMap& m, int n) {
        AffineMap out;
        for (int k = 0; k < n; ++k) out = out.then(m);
        return out;
    }

    ConverterParams params_;
    ModelVariant variant_;
    SourceInputs u_;
    SimConfig cfg_;
    PhaseModel on_, off_;
    double tau_on_ = 0, tau_off_ = 0;
    AffineMap step_on_, step_off_, full_on_, full_off_, cycle_;
};

inline std::pair<StateVector, Trajectory> integrate_cycle(const ConverterParams& p, ModelVariant variant,
                                                          const SourceInputs& u, const StateVector& x0,
                                                          const SimConfig& cfg = {}) {
    return CycleIntegrator(p, variant, u, cfg).integrate(x0);
}

// Repeated cycles from x0; stops early once the cycle-to-cycle change is below tol.
inline StateVector power_iterate(const CycleIntegrator& ci, StateVector x, long cycles, double tol = 0.0) {
    for (long k = 0; k < cycles; ++k) {
        const StateVector next = ci.advance(x);
        const double step = (next - x).norm() / (1.0 + next.norm());
        x = next;
        if (tol > 0.0 && step < tol) break;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Measurements

struct DeviceStats {
    std::string name;
    double avg_current = 0;
    double rms_current = 0;
    double peak_current = 0;
    double peak_voltage = 0;
};

struct Measurements {
    double avg_Vo = 0;
    StateVector avg = StateVector::Zero();
    StateVector rms = StateVector::Zero();
    std::array<double, 4> ripple_iL{};
    std::array<double, 3> ripple_vC{};
    std::vector<DeviceStats> devices;  // Q, D1..D7, Do, C1, C2, Co
    double zcs_residual = 0;
    double on_rms_switch_current = 0;  // rms of I_Q over the conduction interval only

    const DeviceStats& device(const std::string& name) const {
        for (const auto& d : devices)
            if (d.name == name) return d;
        throw DomainError("unknown device " + name);
    }
};

struct SteadyStateResult {
    ConverterParams params;
    ModelVariant variant = ModelVariant::Reconciled;
    SourceInputs u;
    StateVector x_periodic = StateVector::Zero();
    Trajectory cycle;
    Measurements measurements;
    double spectral_radius = 0;
    double residual = 0;
    std::vector<std::string> warnings;
};

namespace detail {

// Trapezoidal integral over one cycle of g(x, phase), each phase integrated over its own samples
// so that quantities discontinuous at the switching instant are handled per interval.
template <class G>
double cycle_integral(const Trajectory& tr, G&& g) {
    double s = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        const SwitchPhase ph = tr.phase[i];
        const double h = tr.t[i] - tr.t[i - 1];
        s += 0.5 * h * (g(tr.x[i - 1], ph) + g(tr.x[i], ph));
    }
    return s;
}

template <class G>
double interval_integral(const Trajectory& tr, SwitchPhase which, G&& g) {
    double s = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        if (tr.phase[i] != which) continue;
        const double h = tr.t[i] - tr.t[i - 1];
        s += 0.5 * h * (g(tr.x[i - 1]) + g(tr.x[i]));
    }
    return s;
}

template <class G>
double cycle_peak(const Trajectory& tr, G&& g) {
    double m = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        const SwitchPhase ph = tr.phase[i];
        m = std::max({m, std::abs(g(tr.x[i - 1], ph)), std::abs(g(tr.x[i], ph))});
    }
    return m;
}

}  // namespace detail

inline Measurements measure(const Trajectory& tr, const ConverterParams& p, ModelVariant variant,
                            const SourceInputs& u) {
    Measurements m;
    if (tr.size() < 2) return m;
    const double T = tr.t.back() - tr.t.front();
    for (int k = 0; k < kStates; ++k) {
        double lo = tr.x[0](k), hi = lo;
        for (const auto& x : tr.x) {
            lo = std::min(lo, x(k));
            hi = std::max(hi, x(k));
        }
        const double mean = detail::cycle_integral(tr, [k](const StateVector& x, SwitchPhase) { return x(k); }) / T;
        const double ms =
            detail::cycle_integral(tr, [k](const StateVector& x, SwitchPhase) { return x(k) * x(k); }) / T;
        m.avg(k) = mean;
        m.rms(k) = std::sqrt(std::max(ms, 0.0));
        if (k < 4) m.ripple_iL[k] = hi - lo;
        else m.ripple_vC[k - 4] = hi - lo;
    }
    m.avg_Vo = m.avg(vCo);

    auto add_device = [&](std::string name, auto current, auto voltage) {
        DeviceStats d;
        d.name = std::move(name);
        d.avg_current = detail::cycle_integral(tr, current) / T;
        const double ms =
            detail::cycle_integral(tr, [&](const StateVector& x, SwitchPhase ph) { return current(x, ph) * current(x, ph); }) / T;
        d.rms_current = std::sqrt(std::max(ms, 0.0));
        d.peak_current = detail::cycle_peak(tr, current);
        d.peak_voltage = detail::cycle_peak(tr, voltage);
        m.devices.push_back(std::move(d));
    };
    add_device("Q", switch_current, switch_blocking_voltage);
    for (int k = 0; k < kDiodes; ++k) {
        add_device(std::string(kDiodeNames[k]),
                   [k](const StateVector& x, SwitchPhase ph) { return diode_current(k, x, ph); },
                   [&, k](const StateVector& x, SwitchPhase ph) { return diode_blocking_voltage(k, x, u, p, ph); });
    }
    const PhaseModel on = build_phase_model(p, SwitchPhase::On, variant);
    const PhaseModel off = build_phase_model(p, SwitchPhase::Off, variant);
    const auto C = p.capacitances();
    static const char* cap_names[] = {"C1", "C2", "Co"};
    for (int c = 0; c < 3; ++c) {
        const int row = vC1 + c;
        add_device(
            cap_names[c],
            [&, row, c](const StateVector& x, SwitchPhase ph) {
                const PhaseModel& mdl = ph == SwitchPhase::On ? on : off;
                return C[c] * state_derivative(mdl, x, u)(row);
            },
            [row](const StateVector& x, SwitchPhase) { return x(row); });
    }

    const std::size_t boundary = static_cast<std::size_t>(tr.steps_per_phase);
    m.zcs_residual = std::abs(switch_current(tr.x.at(boundary), SwitchPhase::On));
    const double t_on = tr.t[boundary] - tr.t[0];
    if (t_on > 0.0) {
        const double ms = detail::interval_integral(tr, SwitchPhase::On, [](const StateVector& x) {
            const double i = switch_current(x, SwitchPhase::On);
            return i * i;
        });
        m.on_rms_switch_current = std::sqrt(std::max(ms / t_on, 0.0));
    }
    return m;
}

inline Measurements measure(const SteadyStateResult& ss, const ConverterParams& p) {
    return measure(ss.cycle, p, ss.variant, ss.u);
}

inline double spectral_radius(const StateMatrix& M) {
    Eigen::EigenSolver<StateMatrix> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Affine cycle map recovered from 8 probe cycles: x0 = 0 and the 7 unit states.
inline AffineMap probe_cycle_map(const CycleIntegrator& ci) {
    AffineMap m;
    m.g = ci.advance(StateVector::Zero());
    for (int k = 0; k < kStates; ++k) m.Phi.col(k) = ci.advance(StateVector::Unit(k)) - m.g;
    return m;
}

inline SteadyStateResult find_steady_state(const ConverterParams& p, ModelVariant variant, const SourceInputs& u,
                                           const SimConfig& cfg = {}) {
    const CycleIntegrator ci(p, variant, u, cfg);
    const AffineMap map = probe_cycle_map(ci);
    const double rho = spectral_radius(map.Phi);
    if (std::abs(rho - 1.0) < 1e-7)
        throw MarginalStabilityError("cycle map has spectral radius 1 (" + csv::number(rho, 12) +
                                         "); periodic orbit is not unique",
                                     rho);
    if (rho > 1.0)
        throw UnstableOrbitError("cycle map has spectral radius " + csv::number(rho, 12) + " > 1", rho);
    const StateMatrix IminusPhi = StateMatrix::Identity() - map.Phi;
    Eigen::FullPivLU<StateMatrix> lu(IminusPhi);
    if (!lu.isInvertible()) throw MarginalStabilityError("I - Phi is singular to working precision", rho);
    StateVector xs = lu.solve(map.g);
    xs += lu.solve(map.g - IminusPhi * xs);

    SteadyStateResult ss;
    ss.params = p;
    ss.variant = variant;
    ss.u = u;
    ss.x_periodic = xs;
    ss.spectral_radius = rho;
    auto [x_end, tr] = ci.integrate(xs);
    ss.residual = (x_end - xs).norm() / (1.0 + xs.norm());
    if (ss.residual > cfg.fp_tol)
        throw MarginalStabilityError("fixed-point residual " + csv::number(ss.residual) + " exceeds tolerance", rho);
    ss.cycle = std::move(tr);
    for (int k = 0; k < 4; ++k) {
        double lo = 0.0;
        for (const auto& x : ss.cycle.x) lo = std::min(lo, x(k));
        if (lo < 0.0)
            ss.warnings.push_back("DCM: " + std::string(kStateNames[k]) + " reaches " + csv::number(lo) +
                                  " A; continuous-conduction model kept");
    }
    ss.measurements = measure(ss.cycle, p, variant, u);
    return ss;
}

// ---------------------------------------------------------------------------
// Balance residuals

struct BalanceResiduals {
    std::array<double, 4> volt_sec{};      // integral of v_Lk over the cycle, V s
    std::array<double, 3> charge{};        // integral of i_Ck over the cycle, A s
    std::array<double, 4> volt_sec_scale{};  // integral of |v_Lk|
    std::array<double, 3> charge_scale{};    // integral of |i_Ck|

    double max_relative() const {
        double r = 0.0;
        for (int k = 0; k < 4; ++k) r = std::max(r, std::abs(volt_sec[k]) / std::max(volt_sec_scale[k], 1e-300));
        for (int k = 0; k < 3; ++k) r = std::max(r, std::abs(charge[k]) / std::max(charge_scale[k], 1e-300));
        return r;
    }
};

namespace detail {

// Exact integral of x(t) over tau from exp of [[A, c, 0], [0, 0, 0], [I, 0, 0]].
inline StateVector exact_state_integral(const PhaseModel& m, const SourceInputs& u, const StateVector& x0,
                                        double tau) {
    constexpr int N = 2 * kStates + 1;
    Eigen::Matrix<double, N, N> M = Eigen::Matrix<double, N, N>::Zero();
    M.block<kStates, kStates>(0, 0) = m.A * tau;
    M.block<kStates, 1>(0, kStates) = (m.B * u.vec() + m.f) * tau;
    M.block<kStates, kStates>(kStates + 1, 0) = StateMatrix::Identity() * tau;
    const Eigen::Matrix<double, N, N> E = M.exp();
    Eigen::Matrix<double, N, 1> z = Eigen::Matrix<double, N, 1>::Zero();
    z.head<kStates>() = x0;
    z(kStates) = 1.0;
    return (E * z).tail<kStates>();
}

}  // namespace detail

// Integrates each phase's derivative exactly from the cycle start state x(0) of the trajectory.
inline BalanceResiduals balance_check(const Trajectory& tr, const ConverterParams& p, ModelVariant variant,
                                      const SourceInputs& u) {
    BalanceResiduals r;
    if (tr.size() < 2) return r;
    const PhaseModel on = build_phase_model(p, SwitchPhase::On, variant);
    const PhaseModel off = build_phase_model(p, SwitchPhase::Off, variant);
    const std::size_t boundary = static_cast<std::size_t>(tr.steps_per_phase);
    const double tau_on = tr.t[boundary] - tr.t[0];
    const double tau_off = tr.t.back() - tr.t[boundary];
    const StateVector c_on = on.B * u.vec() + on.f;
    const StateVector c_off = off.B * u.vec() + off.f;
    const StateVector dx = on.A * detail::exact_state_integral(on, u, tr.x[0], tau_on) + c_on * tau_on +
                           off.A * detail::exact_state_integral(off, u, tr.x[boundary], tau_off) + c_off * tau_off;
    const auto L = p.inductances();
    const auto C = p.capacitances();
    for (int k = 0; k < 4; ++k) {
        r.volt_sec[k] = L[k] * dx(k);
        r.volt_sec_scale[k] = detail::cycle_integral(tr, [&, k](const StateVector& x, SwitchPhase ph) {
            return std::abs(L[k] * state_derivative(ph == SwitchPhase::On ? on : off, x, u)(k));
        });
    }
    for (int k = 0; k < 3; ++k) {
        r.charge[k] = C[k] * dx(4 + k);
        r.charge_scale[k] = detail::cycle_integral(tr, [&, k](const StateVector& x, SwitchPhase ph) {
            return std::abs(C[k] * state_derivative(ph == SwitchPhase::On ? on : off, x, u)(4 + k));
        });
    }
    return r;
}

inline BalanceResiduals balance_check(const SteadyStateResult& ss) {
    return balance_check(ss.cycle, ss.params, ss.variant, ss.u);
}

// ---------------------------------------------------------------------------
// Duty sweep

struct SweepRow {
    double D = 0;
    bool ok = false;
    std::string error;
    Measurements measurements;
    double gain_observed = 0;
    double gain_formula = 0;
    double deviation = 0;
};

inline std::vector<SweepRow> sweep(const ConverterParams& params, const std::vector<double>& duty_list,
                                   ModelVariant variant, const SimConfig& cfg = {}) {
    std::vector<SweepRow> rows;
    rows.reserve(duty_list.size());
    for (double D : duty_list) {
        SweepRow row;
        row.D = D;
        try {
            ConverterParams p = params;
            p.D = D;
            row.gain_formula = ideal_gain(D);
            const auto ss = find_steady_state(p, variant, nominal_inputs(p), cfg);
            row.measurements = ss.measurements;
            row.gain_observed = ss.measurements.avg_Vo / p.Vpv;
            row.deviation = std::abs(row.gain_observed - row.gain_formula) / row.gain_formula;
            row.ok = true;
        } catch (const Error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows,
                            int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"D", "status", "avg_Vo", "gain_observed", "gain_formula", "deviation", "ripple_iL1", "error"});
    for (const auto& r : rows) {
        w.cell(r.D).cell(r.ok ? "ok" : "error");
        if (r.ok) {
            w.cell(r.measurements.avg_Vo).cell(r.gain_observed).cell(r.gain_formula).cell(r.deviation)
                .cell(r.measurements.ripple_iL[0]).cell("");
        } else {
            w.cell("").cell("").cell(r.gain_formula).cell("").cell("").cell(r.error);
        }
        w.end_row();
    }
}

// ---------------------------------------------------------------------------
// Export

inline void write_waveform_csv(std::ostream& os, const Trajectory& tr, int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"t", "iL1", "iL2", "iL3", "iL4", "vC1", "vC2", "vCo", "I_Q", "phase"});
    for (std::size_t i = 0; i < tr.size(); ++i) {
        w.cell(tr.t[i]);
        for (int k = 0; k < kStates; ++k) w.cell(tr.x[i](k));
        w.cell(switch_current(tr.x[i], tr.phase[i])).cell(to_string(tr.phase[i])).end_row();
        // Repeat the switching instant under the next phase so discontinuous columns keep both values.
        if (i + 1 < tr.size() && tr.phase[i + 1] != tr.phase[i]) {
            w.cell(tr.t[i]);
            for (int k = 0; k < kStates; ++k) w.cell(tr.x[i](k));
            w.cell(switch_current(tr.x[i], tr.phase[i + 1])).cell(to_string(tr.phase[i + 1])).end_row();
        }
    }
}

inline void write_measurements_csv(std::ostream& os, const Measurements& m, int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"quantity", "value", "unit"});
    w.cell("avg_Vo").cell(m.avg_Vo).cell("V").end_row();
    for (int k = 0; k < kStates; ++k)
        w.cell("avg_" + std::string(kStateNames[k])).cell(m.avg(k)).cell(k < 4 ? "A" : "V").end_row();
    for (int k = 0; k < 4; ++k)
        w.cell("ripple_" + std::string(kStateNames[k])).cell(m.ripple_iL[k]).cell("A").end_row();
    for (int k = 0; k < 3; ++k)
        w.cell("ripple_" + std::string(kStateNames[4 + k])).cell(m.ripple_vC[k]).cell("V").end_row();
    for (const auto& d : m.devices) {
        w.cell(d.name + "_avg_current").cell(d.avg_current).cell("A").end_row();
        w.cell(d.name + "_rms_current").cell(d.rms_current).cell("A").end_row();
        w.cell(d.name + "_peak_current").cell(d.peak_current).cell("A").end_row();
        w.cell(d.name + "_peak_voltage").cell(d.peak_voltage).cell("V").end_row();
    }
    w.cell("zcs_residual").cell(m.zcs_residual).cell("A").end_row();
}

}  // namespace mqbqr
