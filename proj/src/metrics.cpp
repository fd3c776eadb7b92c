#include "scribseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace scribseg {

double dice(const Array2D<uint8_t>& pred, const Array2D<uint8_t>& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("dice: shape mismatch");
    size_t a = 0, b = 0, inter = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool pa = pred.data[i] != 0, pb = gt.data[i] != 0;
        a += pa;
        b += pb;
        inter += pa && pb;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

std::vector<std::pair<int, int>> surface_pixels(const Array2D<uint8_t>& mask) {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            bool border = r == 0 || c == 0 || r == mask.rows - 1 || c == mask.cols - 1;
            if (!border) {
                border = !mask.at(r - 1, c) || !mask.at(r + 1, c) || !mask.at(r, c - 1) ||
                         !mask.at(r, c + 1);
            }
            if (border) out.emplace_back(r, c);
        }
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * (values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return (1.0 - frac) * values[lo] + frac * values[hi];
}

namespace {

std::vector<double> directed_distances(const std::vector<std::pair<int, int>>& from,
                                       const std::vector<std::pair<int, int>>& to, double sr,
                                       double sc) {
    std::vector<double> out;
    out.reserve(from.size());
    for (auto [ar, ac] : from) {
        double best = 1e300;
        for (auto [br, bc] : to) {
            const double dr = (ar - br) * sr, dc = (ac - bc) * sc;
            best = std::min(best, dr * dr + dc * dc);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

}  // namespace

std::optional<double> hd95(const Array2D<uint8_t>& pred, const Array2D<uint8_t>& gt,
                           double spacing_row_mm, double spacing_col_mm) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("hd95: shape mismatch");
    auto sp = surface_pixels(pred);
    auto sg = surface_pixels(gt);
    if (sp.empty() && sg.empty()) return 0.0;
    if (sp.empty() || sg.empty()) return std::nullopt;
    auto d_pg = directed_distances(sp, sg, spacing_row_mm, spacing_col_mm);
    auto d_gp = directed_distances(sg, sp, spacing_row_mm, spacing_col_mm);
    return std::max(percentile(std::move(d_pg), 95.0), percentile(std::move(d_gp), 95.0));
}

namespace {

struct Stats {
    double mean = 0.0, sd = 0.0;
    int n = 0;
};

Stats mean_sd(const std::vector<double>& v) {
    Stats s;
    s.n = static_cast<int>(v.size());
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= v.size();
    if (v.size() > 1) {
        double acc = 0.0;
        for (double x : v) acc += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(acc / (v.size() - 1));
    }
    return s;
}

}  // namespace

EvalResult aggregate_patients(const std::vector<PatientSlices>& patients, int num_classes) {
    EvalResult result;
    for (const auto& p : patients) {
        if (p.pred.size() != p.gt.size())
            throw std::invalid_argument("aggregate_patients: slice count mismatch");
        for (int k = 1; k < num_classes; ++k) {
            size_t a = 0, b = 0, inter = 0;
            std::vector<double> d_pg, d_gp;
            bool undefined = false;
            bool any_slice = false;
            for (size_t s = 0; s < p.pred.size(); ++s) {
                Array2D<uint8_t> bp(p.pred[s].rows, p.pred[s].cols, 0);
                Array2D<uint8_t> bg(p.gt[s].rows, p.gt[s].cols, 0);
                for (size_t i = 0; i < bp.size(); ++i) {
                    bp.data[i] = p.pred[s].data[i] == k;
                    bg.data[i] = p.gt[s].data[i] == k;
                    const bool pa = bp.data[i], pb = bg.data[i];
                    a += pa;
                    b += pb;
                    inter += pa && pb;
                }
                auto spx = surface_pixels(bp);
                auto sgx = surface_pixels(bg);
                if (spx.empty() && sgx.empty()) continue;
                if (spx.empty() || sgx.empty()) {
                    undefined = true;
                    continue;
                }
                any_slice = true;
                auto da = directed_distances(spx, sgx, p.spacing_row_mm, p.spacing_col_mm);
                auto db = directed_distances(sgx, spx, p.spacing_row_mm, p.spacing_col_mm);
                d_pg.insert(d_pg.end(), da.begin(), da.end());
                d_gp.insert(d_gp.end(), db.begin(), db.end());
            }
            EvalEntry e;
            e.patient_id = p.patient_id;
            e.class_index = k;
            e.dsc = (a + b == 0) ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
            if (undefined)
                e.hd95_mm = std::nullopt;
            else if (!any_slice)
                e.hd95_mm = 0.0;
            else
                e.hd95_mm = std::max(percentile(d_pg, 95.0), percentile(d_gp, 95.0));
            result.entries.push_back(std::move(e));
        }
    }

    std::vector<double> all_dsc, all_hd;
    int all_undef = 0;
    for (int k = 1; k < num_classes; ++k) {
        std::vector<double> dscs, hds;
        int undef = 0;
        for (const auto& e : result.entries) {
            if (e.class_index != k) continue;
            dscs.push_back(e.dsc);
            all_dsc.push_back(e.dsc);
            if (e.hd95_mm) {
                hds.push_back(*e.hd95_mm);
                all_hd.push_back(*e.hd95_mm);
            } else {
                ++undef;
                ++all_undef;
            }
        }
        ClassAggregate agg;
        auto sd_d = mean_sd(dscs);
        auto sd_h = mean_sd(hds);
        agg.dsc_mean = sd_d.mean;
        agg.dsc_sd = sd_d.sd;
        agg.hd95_mean = sd_h.mean;
        agg.hd95_sd = sd_h.sd;
        agg.n_patients = sd_d.n;
        agg.hd95_undefined = undef;
        result.per_class[k] = agg;
    }
    auto od = mean_sd(all_dsc);
    auto oh = mean_sd(all_hd);
    result.overall = {od.mean, od.sd, oh.mean, oh.sd, od.n, all_undef};
    return result;
}

std::string render_report(const EvalResult& result, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os << "class            DSC%  MEAN(SD)      HD95mm MEAN(SD)   undef\n";
    auto row = [&](const std::string& name, const ClassAggregate& a) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-16s %6.1f (%4.1f)    %7.2f (%5.2f)   %d\n", name.c_str(),
                      100.0 * a.dsc_mean, 100.0 * a.dsc_sd, a.hd95_mean, a.hd95_sd,
                      a.hd95_undefined);
        os << buf;
    };
    for (const auto& [k, agg] : result.per_class) {
        std::string name = (k < static_cast<int>(class_names.size())) ? class_names[k]
                                                                      : "class" + std::to_string(k);
        row(name, agg);
    }
    row("avg", result.overall);
    return os.str();
}

std::string eval_result_csv(const EvalResult& result) {
    std::ostringstream os;
    os << "patient,class,dsc,hd95_mm\n";
    for (const auto& e : result.entries) {
        os << e.patient_id << "," << e.class_index << "," << e.dsc << ",";
        if (e.hd95_mm)
            os << *e.hd95_mm;
        else
            os << "undefined";
        os << "\n";
    }
    return os.str();
}

}  // namespace scribseg
