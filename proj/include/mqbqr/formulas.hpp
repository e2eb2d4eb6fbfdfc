#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mqbqr/csv.hpp"
#include "mqbqr/errors.hpp"
#include "mqbqr/types.hpp"

namespace mqbqr {

// Ideal voltage gain Vo/Vin = 3 - D.
inline double ideal_gain(double D) {
    if (!(D >= 0.0 && D <= 1.0)) throw DomainError("ideal_gain: duty ratio must lie in [0, 1]");
    return 3.0 - D;
}

inline double duty_for_output(double Vin, double Vo) {
    if (!(Vin > 0.0) || !std::isfinite(Vin)) throw DomainError("duty_for_output: Vin must be > 0");
    const double D = (3.0 * Vin - Vo) / Vin;
    if (!(D > 0.0 && D < 1.0))
        throw AchievabilityError("duty_for_output: Vo=" + csv::number(Vo) + " V needs D=" + csv::number(D) +
                                     ", feasible output interval is (" + csv::number(2.0 * Vin) + ", " +
                                     csv::number(3.0 * Vin) + ") V",
                                 2.0 * Vin, 3.0 * Vin);
    return D;
}

// Solves the averaged balance chain for (Vc1, Vc2, Vo) at Vpv = 1:
//   Vc1 = Vpv,  2 Vpv + Vc1 (1 - D) - Vc2 = 0,  Vc2 = Vo.
inline double gain_from_balance(double D) {
    if (!(D > 0.0 && D < 1.0)) throw DomainError("gain_from_balance: duty ratio must lie in (0, 1)");
    Eigen::Matrix3d M;
    M << 1.0, 0.0, 0.0,
         -(1.0 - D), 1.0, 0.0,
         0.0, -1.0, 1.0;
    const Eigen::Vector3d rhs(1.0, 2.0, 0.0);
    const Eigen::Vector3d sol = M.partialPivLu().solve(rhs);
    return sol(2);
}

// ---------------------------------------------------------------------------
// Device stresses

struct ConsistencyFlag {
    std::string field;
    std::string message;
};

struct StressReport {
    double V_switch = 0, V_D1 = 0, V_D2 = 0, V_D3 = 0, V_D4 = 0, V_D5 = 0, V_D6 = 0, V_D7 = 0;
    // Second printed value for V_D6 (Vc2 - Vbat with Vc2 = Vo) and the V_D3/V_D4 value implied by Vc1 = Vpv.
    double V_D6_alt = 0, V_D34_alt = 0;
    double I_in = 0, I_L1 = 0, I_L2 = 0, I_L3 = 0, I_L4 = 0, I_Q = 0;
    double I_D1 = 0, I_D2 = 0, I_D3 = 0, I_D4 = 0, I_D5 = 0, I_D6 = 0, I_D7 = 0, I_Do = 0;
    std::vector<ConsistencyFlag> flags;

    std::vector<double> currents() const {
        return {I_in, I_L1, I_L2, I_L3, I_L4, I_Q, I_D1, I_D2, I_D3, I_D4, I_D5, I_D6, I_D7, I_Do};
    }
};

inline StressReport device_stress_report(double D, double Io, double Vpv, double Vbat, double Vo) {
    if (!(D > 0.0 && D < 1.0)) throw DomainError("device_stress_report: duty ratio must lie in (0, 1)");
    if (!(Io >= 0.0)) throw DomainError("device_stress_report: Io must be >= 0");
    StressReport r;
    const double Vc1 = Vpv;
    const double Vc2 = Vo;
    r.V_switch = Vc1;
    r.V_D1 = Vc1;
    r.V_D2 = Vpv - Vc1;
    r.V_D3 = Vpv / 2.0;
    r.V_D4 = Vpv / 2.0;
    r.V_D34_alt = Vc1;
    r.V_D5 = Vo / 2.0;
    r.V_D6 = Vo / 2.0;
    r.V_D6_alt = Vc2 - Vbat;
    r.V_D7 = (Vbat - Vo) / 2.0;

    r.I_in = Io * (3.0 - D);
    r.I_L1 = r.I_in;
    r.I_L2 = r.I_in;
    r.I_D1 = r.I_L2;
    r.I_D3 = r.I_L1;
    r.I_D2 = 2.0 * Io * (3.0 - D);
    r.I_L3 = (2.0 - D) * Io;
    r.I_L4 = Io;
    r.I_Q = (4.0 - D) * Io;
    r.I_D4 = r.I_Q;
    r.I_D5 = Io;
    r.I_D6 = Io;
    r.I_D7 = Io;
    r.I_Do = Io;

    r.flags.push_back({"V_D3", "V_D3 = V_D4 = Vpv/2 contradicts V_switch = Vc1 = Vpv on the same line set; "
                               "V_D34_alt carries Vc1 = Vpv"});
    if (r.V_D6 != r.V_D6_alt)
        r.flags.push_back({"V_D6", "V_D6 is given both as Vo/2 and as Vc2 - Vbat; V_D6_alt carries Vc2 - Vbat with Vc2 = Vo"});
    if (r.V_D7 < 0.0)
        r.flags.push_back({"V_D7", "V_D7 = (Vbat - Vo)/2 is negative (magnitude " + csv::number(-r.V_D7) +
                                       " V); sign convention unresolved"});
    r.flags.push_back({"I_L1", "I_L1 + I_L2 = 2 Io (3 - D) exceeds I_Q = (4 - D) Io although both inductors "
                               "conduct through the switch"});
    r.flags.push_back({"I_Do", "the current list names an eighth diode D8; it is taken to be the output diode Do"});
    return r;
}

// ---------------------------------------------------------------------------
// Component sizing

struct SizingSpec {
    double Vin = 20.0;
    double Vo = 52.0;
    double D = 0.4;
    double fs = 50e3;
    double R = 1000.0;
    double dI_L1 = 0.1, dI_L2 = 0.1, dI_L3 = 0.1, dI_L4 = 0.1;
    double dV_C1 = 0.2, dV_C2 = 0.52, dV_Co = 0.52;
};

struct SizedComponents {
    double L1 = 0, L2 = 0, L3 = 0, L4 = 0, C1 = 0, C2 = 0, Co = 0;

    void apply_to(ConverterParams& p) const {
        p.L1 = L1;
        p.L2 = L2;
        p.L3 = L3;
        p.L4 = L4;
        p.C1 = C1;
        p.C2 = C2;
        p.Co = Co;
    }
};

inline SizedComponents size_components(const SizingSpec& s) {
    if (!(s.D > 0.0 && s.D < 1.0)) throw DomainError("size_components: duty ratio must lie in (0, 1)");
    if (!(s.fs > 0.0) || !(s.R > 0.0)) throw DomainError("size_components: fs and R must be > 0");
    const std::pair<const char*, double> ripples[] = {{"dI_L1", s.dI_L1}, {"dI_L2", s.dI_L2}, {"dI_L3", s.dI_L3},
                                                      {"dI_L4", s.dI_L4}, {"dV_C1", s.dV_C1}, {"dV_C2", s.dV_C2},
                                                      {"dV_Co", s.dV_Co}};
    for (const auto& [name, v] : ripples) {
        if (v == 0.0) throw DivisionError(std::string("size_components: ripple target ") + name + " is zero");
        if (!(v > 0.0)) throw DomainError(std::string("size_components: ripple target ") + name + " must be > 0");
    }
    const double D = s.D;
    SizedComponents c;
    c.L1 = s.Vin * D / (s.dI_L1 * s.fs);
    c.L2 = s.Vin * D / (s.dI_L2 * s.fs);
    c.L3 = s.Vin * D * D / (s.dI_L3 * s.fs * (1.0 - D));
    c.L4 = s.Vin * D * D / (s.dI_L4 * s.fs * (1.0 - D));
    c.C1 = s.Vo * D / (s.dV_C1 * s.fs * s.R * (1.0 - D));
    c.C2 = s.Vo * D / (s.dV_C2 * s.fs * s.R);
    c.Co = s.Vo / (s.dV_Co * s.fs * 3.0 * (1.0 - D) * s.R);
    return c;
}

// ---------------------------------------------------------------------------
// Soft switching

inline double min_snubber_inductance(double V_Q_off, double t_r, double gamma_i, double i_Q_on) {
    if (gamma_i == 0.0 || i_Q_on == 0.0) throw DivisionError("min_snubber_inductance: gamma_i and i_Q_on must be non-zero");
    if (!(V_Q_off > 0.0 && t_r > 0.0 && gamma_i > 0.0 && i_Q_on > 0.0))
        throw DomainError("min_snubber_inductance: all inputs must be > 0");
    return V_Q_off * t_r / (2.0 * gamma_i * i_Q_on);
}

// n is the auxiliary turns ratio and Leq the equivalent resonant inductance.
inline double zcs_turnoff_instant(double t_zVT, double I_L_t2, double Leq, double n, double Vin) {
    if (n * Vin == 0.0) throw DivisionError("zcs_turnoff_instant: n * Vin is zero");
    if (!(n > 0.0 && Vin > 0.0)) throw DomainError("zcs_turnoff_instant: n and Vin must be > 0");
    return t_zVT + 4.0 * I_L_t2 * Leq / (n * Vin);
}

// ---------------------------------------------------------------------------
// Topology comparison

struct ComparisonOptions {
    double ref9_n = 1.0;     // coupled-inductor turns ratio of the Ref[9] topology
    double ref14_D2 = 0.0;   // second duty of the two-switch Ref[14] topology
};

struct TopologyEntry {
    std::string name;
    int switches = 0;
    int diodes = 0;
    int inductors = 0;
    int capacitors = 0;
    double fs_hz = 0;
    double efficiency_pct = 0;
    double power_w = 0;
    std::string gain_expression;
    std::function<double(double)> gain;
    std::function<bool(double)> valid;
    std::string domain;
};

struct TopologyRow {
    TopologyEntry entry;
    double D = 0;
    bool valid = false;
    double gain = 0;              // meaningful only when valid
    std::string invalid_reason;
};

// Two-duty gain of the Ref[14] topology.
inline double ref14_gain(double D1, double D2) {
    const double den = 1.0 - D1 - D2;
    if (!(den > 0.0)) throw DomainError("ref14_gain: requires D1 + D2 < 1");
    return (1.0 + D1) / den;
}

inline std::vector<TopologyEntry> topology_entries(const ComparisonOptions& o = {}) {
    auto open_unit = [](double D) { return D > 0.0 && D < 1.0; };
    const double n = o.ref9_n;
    const double D2 = o.ref14_D2;
    return {
        {"Ref[6]", 1, 4, 2, 3, 118e3, 91.2, 500, "(2-D)/(1-D)^2",
         [](double D) { return (2.0 - D) / ((1.0 - D) * (1.0 - D)); }, open_unit, "0 < D < 1"},
        {"Ref[8]", 1, 2, 3, 2, 50e3, 95.9, 100, "(D/D1)^2 with D1 = 1-D",
         [](double D) { return (D / (1.0 - D)) * (D / (1.0 - D)); }, open_unit, "0 < D < 1"},
        {"Ref[9]", 1, 5, 2, 4, 40e3, 92.0, 200, "(1+n)/(1-D)^2 with n = " + csv::number(n),
         [n](double D) { return (1.0 + n) / ((1.0 - D) * (1.0 - D)); }, open_unit, "0 < D < 1"},
        {"Ref[11]", 2, 4, 2, 3, 50e3, 93.2, 200, "(3-D)/(1-3D)",
         [](double D) { return (3.0 - D) / (1.0 - 3.0 * D); },
         [](double D) { return D > 0.0 && D < 1.0 / 3.0; }, "0 < D < 1/3"},
        {"Ref[14]", 3, 2, 2, 1, 50e3, 93.6, 200, "(1+D1)/(1-D1-D2) with D1 = D, D2 = " + csv::number(D2),
         [D2](double D) { return ref14_gain(D, D2); },
         [D2](double D) { return D > 0.0 && D2 >= 0.0 && D + D2 < 1.0; }, "0 < D1, D1 + D2 < 1"},
        {"Ref[15]", 1, 3, 2, 3, 100e3, 92.2, 250, "(3+D)/(2(1-D))",
         [](double D) { return (3.0 + D) / (2.0 * (1.0 - D)); }, open_unit, "0 < D < 1"},
        {"Proposed", 1, 8, 4, 3, 50e3, 96.7, 200, "3-D", [](double D) { return 3.0 - D; }, open_unit,
         "0 < D < 1"},
    };
}

inline std::vector<TopologyRow> topology_comparison(double D, const ComparisonOptions& o = {}) {
    if (!(D > 0.0 && D < 1.0)) throw DomainError("topology_comparison: duty ratio must lie in (0, 1)");
    std::vector<TopologyRow> rows;
    for (auto& e : topology_entries(o)) {
        TopologyRow r;
        r.D = D;
        r.valid = e.valid(D);
        if (r.valid) {
            r.gain = e.gain(D);
        } else {
            r.invalid_reason = "outside validity domain " + e.domain;
        }
        r.entry = std::move(e);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_comparison_csv(std::ostream& os, const std::vector<TopologyRow>& rows,
                                 int precision = csv::kDefaultPrecision) {
    csv::Writer w(os, precision);
    w.header({"name", "switches", "diodes", "L", "C", "fs", "gain_at_D", "efficiency_reported", "power_reported"});
    for (const auto& r : rows) {
        w.cell(r.entry.name).cell(r.entry.switches).cell(r.entry.diodes).cell(r.entry.inductors)
            .cell(r.entry.capacitors).cell(r.entry.fs_hz);
        if (r.valid) w.cell(r.gain);
        else w.cell("invalid");
        w.cell(r.entry.efficiency_pct).cell(r.entry.power_w).end_row();
    }
}

inline void write_comparison_markdown(std::ostream& os, const std::vector<TopologyRow>& rows) {
    const double D = rows.empty() ? 0.0 : rows.front().D;
    os << "| Topology | Switches | Diodes | L | C | fs (kHz) | Gain | Gain at D=" << csv::number(D, 4)
       << " | Efficiency (%) | Power (W) |\n";
    os << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        os << "| " << r.entry.name << " | " << r.entry.switches << " | " << r.entry.diodes << " | "
           << r.entry.inductors << " | " << r.entry.capacitors << " | " << csv::number(r.entry.fs_hz / 1e3, 6)
           << " | " << r.entry.gain_expression << " | "
           << (r.valid ? csv::number(r.gain, 6) : "invalid (" + r.entry.domain + ")") << " | "
           << csv::number(r.entry.efficiency_pct, 4) << " | " << csv::number(r.entry.power_w, 6) << " |\n";
    }
}

}  // namespace mqbqr
