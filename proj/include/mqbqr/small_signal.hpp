#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "mqbqr/converter_model.hpp"
#include "mqbqr/csv.hpp"

namespace mqbqr {

using OutputRow = Eigen::Matrix<double, 1, kStates>;
using Complex = std::complex<double>;

struct AveragedModel {
    StateMatrix A_av = StateMatrix::Zero();
    InputMatrix B_av = InputMatrix::Zero();
    OutputRow C_av = OutputRow::Unit(vCo);
    StateVector f_av = StateVector::Zero();
    double D_value = 0;
    ModelVariant variant = ModelVariant::Reconciled;
    PhaseModel on, off;
};

inline AveragedModel assemble_averaged(const ConverterParams& p, ModelVariant variant) {
    require_valid(p);
    AveragedModel m;
    m.on = build_phase_model(p, SwitchPhase::On, variant);
    m.off = build_phase_model(p, SwitchPhase::Off, variant);
    const double D = p.D;
    m.A_av = D * m.on.A + (1.0 - D) * m.off.A;
    m.B_av = D * m.on.B + (1.0 - D) * m.off.B;
    m.f_av = D * m.on.f + (1.0 - D) * m.off.f;
    m.D_value = D;
    m.variant = variant;
    return m;
}

// Solves A_av x + B_av u + f_av = 0.
inline StateVector equilibrium(const AveragedModel& avg, const SourceInputs& u) {
    Eigen::FullPivLU<StateMatrix> lu(avg.A_av);
    if (!lu.isInvertible())
        throw MarginalStabilityError("averaged state matrix is singular; equilibrium is not unique");
    const StateVector rhs = -(avg.B_av * u.vec() + avg.f_av);
    StateVector x = lu.solve(rhs);
    x += lu.solve(rhs - avg.A_av * x);
    const double res = (avg.A_av * x - rhs).norm();
    const double scale = avg.A_av.norm() * x.norm() + rhs.norm();
    if (scale > 0.0 && res > 1e-10 * scale)
        throw MarginalStabilityError("averaged equilibrium residual " + csv::number(res / scale) + " too large");
    return x;
}

enum class TfInput { SourceVoltage, SourceCurrent, Duty };

inline std::string_view to_string(TfInput in) {
    switch (in) {
        case TfInput::SourceVoltage: return "source_voltage";
        case TfInput::SourceCurrent: return "source_current";
        default: return "duty";
    }
}

// Input column of the linearised model for the chosen input.
inline StateVector input_column(const AveragedModel& avg, TfInput input, const StateVector& x_op,
                                const SourceInputs& u_op) {
    switch (input) {
        case TfInput::SourceVoltage: return avg.B_av.col(0);
        case TfInput::SourceCurrent: return avg.B_av.col(1);
        default:
            return (avg.on.A - avg.off.A) * x_op + (avg.on.B - avg.off.B) * u_op.vec() + (avg.on.f - avg.off.f);
    }
}

// Coefficients in descending powers of s.
struct RationalTF {
    std::vector<double> num;
    std::vector<double> den;
    TfInput input = TfInput::SourceVoltage;

    static Complex horner(const std::vector<double>& c, Complex s) {
        Complex acc = 0.0;
        for (double a : c) acc = acc * s + a;
        return acc;
    }
    Complex numerator(Complex s) const { return horner(num, s); }
    Complex denominator(Complex s) const { return horner(den, s); }
    Complex operator()(Complex s) const { return numerator(s) / denominator(s); }
    std::string_view units() const { return input == TfInput::Duty ? "V/duty" : (input == TfInput::SourceVoltage ? "V/V" : "V/A"); }
};

struct FaddeevLeVerrier {
    std::vector<double> charpoly;        // 1, c1, ..., cn
    std::vector<StateMatrix> adjugate;   // M0 .. M(n-1): adj(sI - A) = sum s^(n-1-k) Mk
};

// Run on A / w and rescaled, which keeps the recursion's intermediate traces of order one.
inline FaddeevLeVerrier faddeev_leverrier(const StateMatrix& A) {
    const int n = kStates;
    double w = A.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(w > 0.0)) w = 1.0;
    const StateMatrix As = A / w;
    FaddeevLeVerrier out;
    out.charpoly.assign(n + 1, 0.0);
    out.charpoly[0] = 1.0;
    StateMatrix M = StateMatrix::Identity();
    double wk = 1.0;
    for (int k = 1; k <= n; ++k) {
        out.adjugate.push_back(M * wk);
        const StateMatrix AM = As * M;
        const double c = -AM.trace() / k;
        M = AM + c * StateMatrix::Identity();
        wk *= w;
        out.charpoly[k] = c * wk;
    }
    return out;
}

inline RationalTF transfer_function(const AveragedModel& avg, TfInput input, const StateVector& x_op,
                                    const SourceInputs& u_op = {}) {
    const StateVector b = input_column(avg, input, x_op, u_op);
    const FaddeevLeVerrier fl = faddeev_leverrier(avg.A_av);
    RationalTF tf;
    tf.input = input;
    tf.den = fl.charpoly;
    for (const auto& Mk : fl.adjugate) tf.num.push_back((avg.C_av * Mk * b)(0, 0));
    return tf;
}

// -C A^-1 b
inline double dc_gain(const AveragedModel& avg, const StateVector& b) {
    Eigen::FullPivLU<StateMatrix> lu(avg.A_av);
    if (!lu.isInvertible()) throw MarginalStabilityError("averaged state matrix is singular");
    return -(avg.C_av * lu.solve(b))(0, 0);
}

// C (sI - A)^-1 b by a direct complex solve.
inline Complex solve_response(const AveragedModel& avg, const StateVector& b, Complex s) {
    using CMat = Eigen::Matrix<Complex, kStates, kStates>;
    using CVec = Eigen::Matrix<Complex, kStates, 1>;
    const CMat M = s * CMat::Identity() - avg.A_av.cast<Complex>();
    const CVec x = M.fullPivLu().solve(b.cast<Complex>());
    return (avg.C_av.cast<Complex>() * x)(0, 0);
}

inline std::vector<Complex> frequency_response(const AveragedModel& avg, const StateVector& b,
                                               const std::vector<double>& freqs_hz) {
    std::vector<Complex> out;
    out.reserve(freqs_hz.size());
    for (double f : freqs_hz) {
        if (!(f > 0.0)) throw DomainError("frequency_response: frequencies must be > 0");
        out.push_back(solve_response(avg, b, Complex(0.0, 2.0 * std::numbers::pi * f)));
    }
    return out;
}

inline std::vector<Complex> frequency_response(const RationalTF& tf, const std::vector<double>& freqs_hz) {
    std::vector<Complex> out;
    out.reserve(freqs_hz.size());
    for (double f : freqs_hz) {
        if (!(f > 0.0)) throw DomainError("frequency_response: frequencies must be > 0");
        out.push_back(tf(Complex(0.0, 2.0 * std::numbers::pi * f)));
    }
    return out;
}

inline std::vector<double> log_space(double f_lo, double f_hi, int n) {
    std::vector<double> f;
    if (n <= 0) return f;
    if (n == 1) return {f_lo};
    const double a = std::log10(f_lo), b = std::log10(f_hi);
    for (int k = 0; k < n; ++k) f.push_back(std::pow(10.0, a + (b - a) * k / (n - 1)));
    return f;
}

inline void write_bode_csv(std::ostream& os, const std::vector<double>& freqs_hz, const std::vector<Complex>& g,
                           int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"freq_hz", "re", "im", "mag_db", "phase_deg"});
    for (std::size_t i = 0; i < freqs_hz.size() && i < g.size(); ++i) {
        w.cell(freqs_hz[i]).cell(g[i].real()).cell(g[i].imag()).cell(20.0 * std::log10(std::abs(g[i])))
            .cell(std::arg(g[i]) * 180.0 / std::numbers::pi).end_row();
    }
}

// ---------------------------------------------------------------------------
// Identified reduced-order model, stored as published constants.

struct IdentifiedReference {
    Eigen::Matrix4d A;
    Eigen::Vector4d B;
    Eigen::RowVector4d C;
    double D = 0.0;
    Eigen::Vector4d K;
    double fpe = 1.787e-06;
    double mse = 1.782e-06;
    std::vector<double> tf_num = {0.005823, -4.897e-06};
    std::vector<double> tf_den = {1.0, 0.0004363, 1.428e-15};
};

inline const IdentifiedReference& identified_reference() {
    static const IdentifiedReference ref = [] {
        IdentifiedReference r;
        r.A << -7.759e-05, 0.0009677, 1.597e-05, -5.414e-05,
               0.002662, -0.006506, -0.03907, 0.0573,
               -0.002347, 0.02966, -0.05055, 0.5153,
               -0.001938, 0.008198, -0.06152, -0.411;
        r.B << 1.072e-06, -0.006722, 0.01811, -0.04098;
        r.C << -3414, -1.634, 0.01353, -0.0003253;
        r.K << -0.0002757, -0.4944, 0.777, 0.6606;
        return r;
    }();
    return ref;
}

inline Complex identified_reference_eval(Complex s) {
    const auto& r = identified_reference();
    const Complex den = RationalTF::horner(r.tf_den, s);
    double mag = 0.0, sp = 1.0;
    for (auto it = r.tf_den.rbegin(); it != r.tf_den.rend(); ++it, sp *= std::abs(s)) mag += std::abs(*it) * sp;
    if (std::abs(den) <= 8.0 * std::numeric_limits<double>::epsilon() * mag)
        throw PoleError("identified reference transfer function evaluated at a pole");
    return RationalTF::horner(r.tf_num, s) / den;
}

}  // namespace mqbqr
