#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <vector>

#include "mqbqr/csv.hpp"
#include "mqbqr/errors.hpp"

namespace mqbqr {

// ---------------------------------------------------------------------------
// PID

struct PidController {
    double Kp = 0.0;
    double Ki = 0.0;
    double Kd = 0.0;
    double bias = 0.4;  // output at zero error and empty integrator
    double D_min = 0.05;
    double D_max = 0.95;
    double integrator = 0.0;
    double prev_error = 0.0;
    bool has_prev = false;

    void reset() {
        integrator = 0.0;
        prev_error = 0.0;
        has_prev = false;
    }
};

inline void require_valid(const PidController& c) {
    if (!(c.D_min > 0.0 && c.D_min < c.D_max && c.D_max < 1.0))
        throw DomainError("PidController clamp must satisfy 0 < D_min < D_max < 1");
}

// Positional PID with conditional integration: the integrator only advances when the
// resulting output stays inside the clamp.
inline double pid_step(PidController& c, double e, double dt) {
    if (!(dt > 0.0)) throw DomainError("pid_step: dt must be > 0");
    const double de = c.has_prev ? (e - c.prev_error) / dt : 0.0;
    c.prev_error = e;
    c.has_prev = true;
    const double trial_integrator = c.integrator + e * dt;
    const double trial = c.bias + c.Kp * e + c.Ki * trial_integrator + c.Kd * de;
    if (trial >= c.D_min && trial <= c.D_max) {
        c.integrator = trial_integrator;
        return trial;
    }
    return std::clamp(c.bias + c.Kp * e + c.Ki * c.integrator + c.Kd * de, c.D_min, c.D_max);
}

// ---------------------------------------------------------------------------
// ANFIS

struct TriangleMf {
    double left = -1.0;
    double peak = 0.0;
    double right = 1.0;

    double operator()(double x) const {
        if (x <= left || x >= right) return x == peak ? 1.0 : 0.0;
        if (x < peak) return (x - left) / (peak - left);
        if (x == peak) return 1.0;
        return (right - x) / (right - peak);
    }
    // d mu / d (left, peak, right)
    std::array<double, 3> gradient(double x) const {
        if (x <= left || x >= right) return {0.0, 0.0, 0.0};
        if (x < peak) {
            const double w = peak - left;
            return {(x - peak) / (w * w), -(x - left) / (w * w), 0.0};
        }
        const double w = right - peak;
        return {0.0, (right - x) / (w * w), (x - peak) / (w * w)};
    }
};

struct Consequent {
    double p = 0.0;  // coefficient of input 1
    double q = 0.0;  // coefficient of input 2
    double r = 0.0;  // constant
};

// Two-input first-order Sugeno network; rule (i, j) pairs MF i of input 1 with MF j of input 2.
struct AnfisModel {
    std::vector<TriangleMf> mf1;
    std::vector<TriangleMf> mf2;
    std::vector<Consequent> rules;  // index i * K2 + j
    double lo = -1.0;  // input coverage range (same for both inputs)
    double hi = 1.0;

    int k1() const { return static_cast<int>(mf1.size()); }
    int k2() const { return static_cast<int>(mf2.size()); }
    std::size_t parameter_count() const { return 3 * (mf1.size() + mf2.size()) + 3 * rules.size(); }
};

// K evenly spaced triangles over [lo, hi]; the outer ones reach past the range so every point
// of it has at least one non-zero membership.
inline std::vector<TriangleMf> triangle_fan(int K, double lo = -1.0, double hi = 1.0) {
    if (K < 1) throw DomainError("triangle_fan: K must be >= 1");
    std::vector<TriangleMf> out;
    if (K == 1) {
        const double half = 0.5 * (hi - lo);
        out.push_back({lo - half, 0.5 * (lo + hi), hi + half});
        return out;
    }
    const double step = (hi - lo) / (K - 1);
    for (int k = 0; k < K; ++k) {
        const double c = lo + step * k;
        out.push_back({c - step, c, c + step});
    }
    return out;
}

inline AnfisModel make_anfis(int K = 5, double nominal = 0.4, double lo = -1.0, double hi = 1.0) {
    AnfisModel m;
    m.mf1 = triangle_fan(K, lo, hi);
    m.mf2 = triangle_fan(K, lo, hi);
    m.rules.assign(static_cast<std::size_t>(K) * K, Consequent{0.0, 0.0, nominal});
    m.lo = lo;
    m.hi = hi;
    return m;
}

struct AnfisLayers {
    std::vector<double> mu1, mu2;  // layer 1
    std::vector<double> w;         // layer 2 firing strengths
    std::vector<double> wbar;      // layer 3 normalised
    std::vector<double> f;         // layer 4 rule outputs
    double sum_w = 0.0;
    double output = 0.0;           // layer 5, before clamping
};

inline AnfisLayers anfis_forward(const AnfisModel& m, double x1, double x2) {
    AnfisLayers L;
    for (const auto& mf : m.mf1) L.mu1.push_back(mf(x1));
    for (const auto& mf : m.mf2) L.mu2.push_back(mf(x2));
    const int K2 = m.k2();
    L.w.resize(m.rules.size());
    for (int i = 0; i < m.k1(); ++i)
        for (int j = 0; j < K2; ++j) L.w[i * K2 + j] = L.mu1[i] * L.mu2[j];
    for (double w : L.w) L.sum_w += w;
    if (!(L.sum_w > 0.0)) throw CoverageError("no rule fires at the given input");
    L.wbar.resize(L.w.size());
    L.f.resize(L.w.size());
    for (std::size_t r = 0; r < L.w.size(); ++r) {
        L.wbar[r] = L.w[r] / L.sum_w;
        const auto& c = m.rules[r];
        L.f[r] = c.p * x1 + c.q * x2 + c.r;
        L.output += L.wbar[r] * L.f[r];
    }
    return L;
}

inline constexpr double kDutyFloor = 1e-6;

inline double anfis_infer(const AnfisModel& m, double x1, double x2) {
    return std::clamp(anfis_forward(m, x1, x2).output, kDutyFloor, 1.0 - kDutyFloor);
}

// Flat parameter vector: [mf1 (l, p, r)..., mf2 (l, p, r)..., rules (p, q, r)...].
inline std::vector<double> anfis_parameters(const AnfisModel& m) {
    std::vector<double> v;
    v.reserve(m.parameter_count());
    for (const auto* set : {&m.mf1, &m.mf2})
        for (const auto& mf : *set) v.insert(v.end(), {mf.left, mf.peak, mf.right});
    for (const auto& c : m.rules) v.insert(v.end(), {c.p, c.q, c.r});
    return v;
}

inline void set_anfis_parameters(AnfisModel& m, const std::vector<double>& v) {
    if (v.size() != m.parameter_count()) throw DomainError("set_anfis_parameters: size mismatch");
    std::size_t k = 0;
    for (auto* set : {&m.mf1, &m.mf2})
        for (auto& mf : *set) {
            mf.left = v[k++];
            mf.peak = v[k++];
            mf.right = v[k++];
        }
    for (auto& c : m.rules) {
        c.p = v[k++];
        c.q = v[k++];
        c.r = v[k++];
    }
}

struct TrainingSample {
    double e = 0.0;      // V
    double de = 0.0;     // V per control step
    double duty = 0.0;
};

// Network inputs are given directly (already normalised); `target` is the duty.
struct AnfisPoint {
    double x1 = 0.0;
    double x2 = 0.0;
    double target = 0.0;
};

// Loss (1/2N) sum (y - t)^2 on the unclamped output.
inline double anfis_loss(const AnfisModel& m, const std::vector<AnfisPoint>& data) {
    double s = 0.0;
    for (const auto& d : data) {
        const double r = anfis_forward(m, d.x1, d.x2).output - d.target;
        s += r * r;
    }
    return data.empty() ? 0.0 : s / (2.0 * data.size());
}

inline double anfis_rmse(const AnfisModel& m, const std::vector<AnfisPoint>& data) {
    return std::sqrt(2.0 * anfis_loss(m, data));
}

inline std::vector<double> anfis_gradient(const AnfisModel& m, const std::vector<AnfisPoint>& data) {
    const int K1 = m.k1(), K2 = m.k2();
    const std::size_t off2 = 3 * m.mf1.size();
    const std::size_t offr = off2 + 3 * m.mf2.size();
    std::vector<double> g(m.parameter_count(), 0.0);
    if (data.empty()) return g;
    const double scale = 1.0 / data.size();
    std::vector<double> dmu1(K1), dmu2(K2);
    for (const auto& d : data) {
        const AnfisLayers L = anfis_forward(m, d.x1, d.x2);
        const double err = (L.output - d.target) * scale;
        std::fill(dmu1.begin(), dmu1.end(), 0.0);
        std::fill(dmu2.begin(), dmu2.end(), 0.0);
        for (int i = 0; i < K1; ++i)
            for (int j = 0; j < K2; ++j) {
                const int r = i * K2 + j;
                const double dy_dw = (L.f[r] - L.output) / L.sum_w;
                dmu1[i] += dy_dw * L.mu2[j];
                dmu2[j] += dy_dw * L.mu1[i];
                g[offr + 3 * r + 0] += err * L.wbar[r] * d.x1;
                g[offr + 3 * r + 1] += err * L.wbar[r] * d.x2;
                g[offr + 3 * r + 2] += err * L.wbar[r];
            }
        for (int i = 0; i < K1; ++i) {
            if (dmu1[i] == 0.0) continue;
            const auto gm = m.mf1[i].gradient(d.x1);
            for (int t = 0; t < 3; ++t) g[3 * i + t] += err * dmu1[i] * gm[t];
        }
        for (int j = 0; j < K2; ++j) {
            if (dmu2[j] == 0.0) continue;
            const auto gm = m.mf2[j].gradient(d.x2);
            for (int t = 0; t < 3; ++t) g[off2 + 3 * j + t] += err * dmu2[j] * gm[t];
        }
    }
    return g;
}

namespace detail {

inline void project_mfs(std::vector<TriangleMf>& mfs, double lo, double hi) {
    constexpr double gap = 1e-3;
    const std::size_t K = mfs.size();
    for (std::size_t k = 1; k < K; ++k) mfs[k].peak = std::max(mfs[k].peak, mfs[k - 1].peak + gap);
    for (std::size_t k = 0; k < K; ++k) {
        auto& mf = mfs[k];
        mf.left = std::min(mf.left, mf.peak - gap);
        mf.right = std::max(mf.right, mf.peak + gap);
        if (k > 0) mf.left = std::min(mf.left, mfs[k - 1].peak);
        if (k + 1 < K) mf.right = std::max(mf.right, mfs[k + 1].peak);
    }
    mfs.front().left = std::min(mfs.front().left, lo - gap);
    mfs.back().right = std::max(mfs.back().right, hi + gap);
}

}  // namespace detail

// Restores left < peak < right, peak ordering and coverage of [lo, hi].
inline void project_anfis(AnfisModel& m) {
    detail::project_mfs(m.mf1, m.lo, m.hi);
    detail::project_mfs(m.mf2, m.lo, m.hi);
}

struct TrainResult {
    AnfisModel model;
    std::vector<double> rmse_history;  // after each epoch
};

// Full-batch gradient descent over MF and consequent parameters.
inline TrainResult anfis_train(AnfisModel model, const std::vector<AnfisPoint>& data, int epochs,
                               double learning_rate) {
    if (data.empty()) throw DomainError("anfis_train: data must be non-empty");
    if (!(learning_rate > 0.0)) throw DomainError("anfis_train: learning_rate must be > 0");
    TrainResult out;
    for (int ep = 0; ep < epochs; ++ep) {
        const auto g = anfis_gradient(model, data);
        auto theta = anfis_parameters(model);
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= learning_rate * g[k];
        set_anfis_parameters(model, theta);
        project_anfis(model);
        out.rmse_history.push_back(anfis_rmse(model, data));
    }
    out.model = std::move(model);
    return out;
}

// ANFIS wrapped as a per-cycle duty controller. e and de/dt are divided by their scales and
// clamped to the coverage range before inference.
struct AnfisController {
    AnfisModel model;
    double e_scale = 20.0;     // V
    double de_scale = 2000.0;  // V/s
    double D_min = 0.05;
    double D_max = 0.95;
    double prev_error = 0.0;
    bool has_prev = false;

    AnfisPoint normalise(double e, double de_per_step, double dt) const {
        AnfisPoint p;
        p.x1 = std::clamp(e / e_scale, model.lo, model.hi);
        p.x2 = std::clamp(de_per_step / dt / de_scale, model.lo, model.hi);
        return p;
    }
    void reset() {
        prev_error = 0.0;
        has_prev = false;
    }
};

inline double anfis_step(AnfisController& c, double e, double dt) {
    if (!(dt > 0.0)) throw DomainError("anfis_step: dt must be > 0");
    const double de = c.has_prev ? e - c.prev_error : 0.0;
    c.prev_error = e;
    c.has_prev = true;
    const AnfisPoint p = c.normalise(e, de, dt);
    return std::clamp(anfis_infer(c.model, p.x1, p.x2), c.D_min, c.D_max);
}

inline std::vector<AnfisPoint> to_anfis_points(const AnfisController& c, const std::vector<TrainingSample>& data,
                                               double dt) {
    std::vector<AnfisPoint> pts;
    pts.reserve(data.size());
    for (const auto& s : data) {
        AnfisPoint p = c.normalise(s.e, s.de, dt);
        p.target = s.duty;
        pts.push_back(p);
    }
    return pts;
}

inline void write_training_csv(std::ostream& os, const std::vector<TrainingSample>& data,
                               int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"e", "de", "duty"});
    for (const auto& s : data) w.cell(s.e).cell(s.de).cell(s.duty).end_row();
}

inline void write_rmse_csv(std::ostream& os, const std::vector<double>& history,
                           int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"epoch", "rmse"});
    for (std::size_t k = 0; k < history.size(); ++k) w.cell(static_cast<long>(k + 1)).cell(history[k]).end_row();
}

}  // namespace mqbqr
