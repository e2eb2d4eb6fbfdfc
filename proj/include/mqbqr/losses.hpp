#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "mqbqr/csv.hpp"
#include "mqbqr/simulator.hpp"

namespace mqbqr {

struct LossInputs {
    double I_D_rms = 0, D = 0, Rds_on = 0;
    double Vs = 0, Is = 0, T_on = 0, T_off = 0, fsw = 0;
    double I_D_avg = 0, Vf = 0;
    double I_L_rms = 0, R_L = 0;
    double I_Co_rms = 0, ESR = 0;
};

struct LossBreakdown {
    double P_cond = 0, P_sw = 0, P_diode = 0, P_copper = 0, P_cap = 0, P_total = 0;

    double P_switch() const { return P_cond + P_sw; }
};

// PaperLinear keeps the copper term as I_rms * R; Quadratic uses I_rms^2 * R.
enum class CopperMode { PaperLinear, Quadratic };

inline LossBreakdown loss_breakdown(const LossInputs& in, CopperMode mode = CopperMode::PaperLinear) {
    const double vals[] = {in.I_D_rms, in.D, in.Rds_on, in.Vs, in.Is, in.T_on, in.T_off, in.fsw,
                           in.I_D_avg, in.Vf, in.I_L_rms, in.R_L, in.I_Co_rms, in.ESR};
    for (double v : vals)
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("loss_breakdown: every input must be finite and >= 0");
    LossBreakdown b;
    b.P_cond = in.I_D_rms * in.I_D_rms * in.D * in.Rds_on;
    b.P_sw = in.Vs * in.Is * (in.T_on + in.T_off) * in.fsw / 2.0;
    b.P_diode = in.I_D_avg * in.Vf;
    b.P_copper = mode == CopperMode::PaperLinear ? in.I_L_rms * in.R_L : in.I_L_rms * in.I_L_rms * in.R_L;
    b.P_cap = in.I_Co_rms * in.I_Co_rms * in.ESR;
    b.P_total = b.P_cond + b.P_sw + b.P_diode + b.P_copper + b.P_cap;
    return b;
}

inline double efficiency(double P_out, double P_total) {
    if (!(P_out > 0.0)) throw DomainError("efficiency: P_out must be > 0");
    if (!(P_total >= 0.0)) throw DomainError("efficiency: P_total must be >= 0");
    return 100.0 * P_out / (P_out + P_total);
}

inline double efficiency(double P_out, const LossBreakdown& losses) { return efficiency(P_out, losses.P_total); }

struct SwitchingTimes {
    double T_on = 0;
    double T_off = 0;
};

struct WaveformLosses {
    LossInputs inputs;        // aggregated inputs that reproduce the per-device sums
    LossBreakdown breakdown;
    std::vector<std::string> warnings;
};

// Diode, copper and capacitor terms are summed per device; since each device shares the same
// parasitic value, the sums are folded into one equivalent LossInputs record.
inline WaveformLosses breakdown_from_waveforms(const SteadyStateResult& ss, const ConverterParams& p,
                                               const SwitchingTimes& sw = {},
                                               CopperMode mode = CopperMode::PaperLinear) {
    WaveformLosses out;
    const Measurements m = measure(ss, p);
    const Parasitics& par = p.parasitics;
    LossInputs& in = out.inputs;

    in.I_D_rms = m.on_rms_switch_current;
    in.D = p.D;
    in.Rds_on = par.Rds_on;
    if (par.Rds_on == 0.0) out.warnings.push_back("Rds_on not set: conduction loss is zero");

    const DeviceStats& q = m.device("Q");
    in.Vs = q.peak_voltage;
    in.Is = q.peak_current;
    in.T_on = sw.T_on;
    in.T_off = sw.T_off;
    in.fsw = p.fs;
    if (sw.T_on == 0.0 && sw.T_off == 0.0) out.warnings.push_back("switching times not set: switching loss is zero");

    double diode_avg = 0.0;
    for (int k = 0; k < kDiodes; ++k) diode_avg += m.device(std::string(kDiodeNames[k])).avg_current;
    in.I_D_avg = diode_avg;
    in.Vf = par.Vf_diode;
    if (par.Vf_diode == 0.0) out.warnings.push_back("Vf_diode not set: diode loss is zero");

    double lin = 0.0, sq = 0.0;
    for (int k = 0; k < 4; ++k) {
        lin += m.rms(k);
        sq += m.rms(k) * m.rms(k);
    }
    in.I_L_rms = mode == CopperMode::PaperLinear ? lin : std::sqrt(sq);
    in.R_L = par.RL_copper;
    if (par.RL_copper == 0.0) out.warnings.push_back("RL_copper not set: copper loss is zero");

    double cap_sq = 0.0;
    for (const char* name : {"C1", "C2", "Co"}) cap_sq += std::pow(m.device(name).rms_current, 2);
    in.I_Co_rms = std::sqrt(cap_sq);
    in.ESR = par.esr_cap;
    if (par.esr_cap == 0.0) out.warnings.push_back("esr_cap not set: capacitor loss is zero");

    out.breakdown = loss_breakdown(in, mode);
    return out;
}

inline void write_loss_csv(std::ostream& os, const LossBreakdown& b, int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"component", "watts", "percent_of_total"});
    const std::pair<const char*, double> rows[] = {{"switch_conduction", b.P_cond},
                                                   {"switch_switching", b.P_sw},
                                                   {"diodes", b.P_diode},
                                                   {"inductor_copper", b.P_copper},
                                                   {"capacitor_esr", b.P_cap}};
    for (const auto& [name, watts] : rows)
        w.cell(name).cell(watts).cell(b.P_total > 0.0 ? 100.0 * watts / b.P_total : 0.0).end_row();
    w.cell("total").cell(b.P_total).cell(b.P_total > 0.0 ? 100.0 : 0.0).end_row();
}

}  // namespace mqbqr
