#pragma once

#include <cmath>
#include <string>

#include "mqbqr/csv.hpp"
#include "mqbqr/errors.hpp"

namespace mqbqr {

struct PvPanel {
    double Voc = 37.8;   // V
    double Isc = 8.3;    // A
    double Vmp = 36.3;   // V
    double Imp = 7.35;   // A
    double Pmax = 213.0; // W, rated
};

// Single-diode model I = Isc - I0 (exp(V / a) - 1) with a = n Vt.
struct PvModel {
    PvPanel panel;
    double a = 0.0;
    double I0 = 0.0;
    double fit_residual = 0.0;       // |I(Vmp) - Imp| / Imp
    double pmax_from_mpp_point = 0.0; // Vmp * Imp
    std::string pmax_note;
};

inline double pv_current(const PvModel& m, double V) {
    return m.panel.Isc - m.I0 * std::expm1(V / m.a);
}

inline PvModel fit_pv(const PvPanel& panel) {
    if (!(panel.Voc > 0 && panel.Isc > 0 && panel.Vmp > 0 && panel.Vmp < panel.Voc && panel.Imp > 0 &&
          panel.Imp < panel.Isc))
        throw DomainError("fit_pv: need 0 < Vmp < Voc and 0 < Imp < Isc");
    // Ratio (exp(Vmp/a) - 1) / (exp(Voc/a) - 1) rises monotonically from 0 to Vmp/Voc in a.
    const double target = (panel.Isc - panel.Imp) / panel.Isc;
    if (!(target < panel.Vmp / panel.Voc)) throw DomainError("fit_pv: no single-diode fit exists for this panel");
    auto ratio = [&](double a) {
        return std::exp((panel.Vmp - panel.Voc) / a) * std::expm1(-panel.Vmp / a) / std::expm1(-panel.Voc / a);
    };
    double lo = 1e-3, hi = 1e3;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (ratio(mid) < target) lo = mid;
        else hi = mid;
    }
    PvModel m;
    m.panel = panel;
    m.a = std::sqrt(lo * hi);
    m.I0 = panel.Isc / std::expm1(panel.Voc / m.a);
    m.fit_residual = std::abs(pv_current(m, panel.Vmp) - panel.Imp) / panel.Imp;
    m.pmax_from_mpp_point = panel.Vmp * panel.Imp;
    if (std::abs(m.pmax_from_mpp_point - panel.Pmax) > 1e-9 * panel.Pmax)
        m.pmax_note = "rated Pmax " + csv::number(panel.Pmax, 6) + " W differs from Vmp*Imp = " +
                      csv::number(m.pmax_from_mpp_point, 6) + " W; the fit honours Voc, Isc, Vmp, Imp";
    return m;
}

inline double pv_operating_point(const PvModel& m, double V) {
    if (!(V >= 0.0 && V <= m.panel.Voc)) throw DomainError("pv_operating_point: V must lie in [0, Voc]");
    return pv_current(m, V);
}

struct PvMpp {
    double V = 0;
    double I = 0;
    double P = 0;
};

// Golden-section search of V * I(V) on [0, Voc].
inline PvMpp pv_mpp(const PvModel& m) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = m.panel.Voc;
    auto P = [&](double V) { return V * pv_current(m, V); };
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = P(c), fd = P(d);
    for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = P(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = P(d);
        }
    }
    const double V = 0.5 * (a + b);
    return {V, pv_current(m, V), P(V)};
}

}  // namespace mqbqr
