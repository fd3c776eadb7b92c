#include "scribseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace scribseg {

namespace {

using CoordMap = std::function<std::pair<double, double>(int, int)>;  // out px -> src coords

Image2D warp_image(const Image2D& in, int out_h, int out_w, const CoordMap& map, double fill) {
    Image2D out(out_h, out_w, fill);
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c) {
            auto [sr, sc] = map(r, c);
            if (sr < -0.5 || sr > in.rows - 0.5 || sc < -0.5 || sc > in.cols - 0.5) continue;
            double cr = std::clamp(sr, 0.0, in.rows - 1.0);
            double cc = std::clamp(sc, 0.0, in.cols - 1.0);
            int r0 = static_cast<int>(std::floor(cr)), c0 = static_cast<int>(std::floor(cc));
            int r1 = std::min(r0 + 1, in.rows - 1), c1 = std::min(c0 + 1, in.cols - 1);
            double fr = cr - r0, fc = cc - c0;
            out.at(r, c) = (1 - fr) * ((1 - fc) * in.at(r0, c0) + fc * in.at(r0, c1)) +
                           fr * ((1 - fc) * in.at(r1, c0) + fc * in.at(r1, c1));
        }
    return out;
}

LabelArray warp_labels(const LabelArray& in, int out_h, int out_w, const CoordMap& map,
                       uint8_t fill) {
    LabelArray out(out_h, out_w, fill);
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c) {
            auto [sr, sc] = map(r, c);
            int nr = static_cast<int>(std::llround(sr));
            int nc = static_cast<int>(std::llround(sc));
            if (in.in_bounds(nr, nc)) out.at(r, c) = in.at(nr, nc);
        }
    return out;
}

void warp_sample(ImageSample& s, int out_h, int out_w, const CoordMap& map) {
    s.image = warp_image(s.image, out_h, out_w, map, 0.0);
    s.scribble.labels = warp_labels(s.scribble.labels, out_h, out_w, map, kUnlabeled);
    if (s.gt_mask) s.gt_mask = warp_labels(*s.gt_mask, out_h, out_w, map, 0);
}

// Bilinear interpolation of a coarse control-point displacement grid.
struct ElasticField {
    int grid, h, w;
    std::vector<double> dr, dc;  // grid*grid each

    std::pair<double, double> displacement(int r, int c) const {
        double gr = (grid - 1) * (h > 1 ? static_cast<double>(r) / (h - 1) : 0.0);
        double gc = (grid - 1) * (w > 1 ? static_cast<double>(c) / (w - 1) : 0.0);
        int r0 = std::min(static_cast<int>(gr), grid - 2), c0 = std::min(static_cast<int>(gc), grid - 2);
        double fr = gr - r0, fc = gc - c0;
        auto lerp = [&](const std::vector<double>& v) {
            return (1 - fr) * ((1 - fc) * v[r0 * grid + c0] + fc * v[r0 * grid + c0 + 1]) +
                   fr * ((1 - fc) * v[(r0 + 1) * grid + c0] + fc * v[(r0 + 1) * grid + c0 + 1]);
        };
        return {lerp(dr), lerp(dc)};
    }
};

}  // namespace

ImageSample apply_common(const ImageSample& sample, const CommonAugmentConfig& cfg, Rng& rng) {
    sample.validate();
    cfg.validate();

    ImageSample s = sample;

    // Zero mean, unit variance.
    double mean = 0.0;
    for (double v : s.image.data) mean += v;
    mean /= static_cast<double>(s.image.size());
    double var = 0.0;
    for (double v : s.image.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(s.image.size());
    double inv_std = 1.0 / std::sqrt(var + 1e-8);
    for (double& v : s.image.data) v = (v - mean) * inv_std;

    if (rng.bernoulli(cfg.p_zoom)) {
        double scale = rng.uniform(cfg.zoom_lo, cfg.zoom_hi);
        int oh = std::max(1, static_cast<int>(std::llround(s.image.rows * scale)));
        int ow = std::max(1, static_cast<int>(std::llround(s.image.cols * scale)));
        double inv_r = static_cast<double>(s.image.rows) / oh;
        double inv_c = static_cast<double>(s.image.cols) / ow;
        warp_sample(s, oh, ow, [=](int r, int c) {
            return std::pair{(r + 0.5) * inv_r - 0.5, (c + 0.5) * inv_c - 0.5};
        });
    }

    if (rng.bernoulli(cfg.p_elastic) && cfg.elastic_grid >= 2) {
        ElasticField f{cfg.elastic_grid, s.image.rows, s.image.cols, {}, {}};
        int n = cfg.elastic_grid * cfg.elastic_grid;
        f.dr.resize(n);
        f.dc.resize(n);
        for (int i = 0; i < n; ++i) f.dr[i] = rng.normal(0.0, cfg.elastic_sigma_px);
        for (int i = 0; i < n; ++i) f.dc[i] = rng.normal(0.0, cfg.elastic_sigma_px);
        warp_sample(s, s.image.rows, s.image.cols, [f = std::move(f)](int r, int c) {
            auto [dr, dc] = f.displacement(r, c);
            return std::pair{r + dr, c + dc};
        });
    }

    if (rng.bernoulli(cfg.p_rotate)) {
        double theta = rng.uniform(-cfg.rotate_deg, cfg.rotate_deg) * M_PI / 180.0;
        double ct = std::cos(theta), st = std::sin(theta);
        double cy = (s.image.rows - 1) / 2.0, cx = (s.image.cols - 1) / 2.0;
        warp_sample(s, s.image.rows, s.image.cols, [=](int r, int c) {
            double dr = r - cy, dc = c - cx;
            return std::pair{cy + ct * dr - st * dc, cx + st * dr + ct * dc};
        });
    }

    if (rng.bernoulli(cfg.p_hflip)) {
        int w = s.image.cols, h = s.image.rows;
        warp_sample(s, h, w, [=](int r, int c) { return std::pair{double(r), double(w - 1 - c)}; });
    }
    if (rng.bernoulli(cfg.p_vflip)) {
        int w = s.image.cols, h = s.image.rows;
        warp_sample(s, h, w, [=](int r, int c) { return std::pair{double(h - 1 - r), double(c)}; });
    }

    const int out_h = cfg.crop_h > 0 ? cfg.crop_h : sample.image.rows;
    const int out_w = cfg.crop_w > 0 ? cfg.crop_w : sample.image.cols;
    if (out_h != s.image.rows || out_w != s.image.cols) {
        // Random crop (or random placement when padding).
        int range_r = std::abs(s.image.rows - out_h);
        int range_c = std::abs(s.image.cols - out_w);
        int jr = range_r > 0 ? static_cast<int>(rng.uniform_int(range_r + 1)) : 0;
        int jc = range_c > 0 ? static_cast<int>(rng.uniform_int(range_c + 1)) : 0;
        int off_r = s.image.rows >= out_h ? jr : -jr;
        int off_c = s.image.cols >= out_w ? jc : -jc;
        warp_sample(s, out_h, out_w,
                    [=](int r, int c) { return std::pair{double(r + off_r), double(c + off_c)}; });
    }

    if (rng.bernoulli(cfg.p_noise)) {
        double sigma = rng.uniform(0.0, cfg.noise_sigma_max);
        for (double& v : s.image.data) v += rng.normal(0.0, sigma);
    }

    return s;
}

Image2D apply_further(const Image2D& image, const FurtherAugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    for (double v : image.data)
        if (!std::isfinite(v)) throw std::invalid_argument("apply_further: non-finite image");

    Image2D img = image;
    const double d = 0.8 * cfg.delta;

    if (rng.bernoulli(cfg.p_op) && cfg.delta > 0.0) {  // Brightness
        double u = rng.uniform(-d, d);
        for (double& v : img.data) v += u;
    }
    if (rng.bernoulli(cfg.p_op) && cfg.delta > 0.0) {  // Contrast
        auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
        double lo = *lo_it, hi = *hi_it;
        double scale = rng.uniform(1.0 - d, 1.0 + d);
        for (double& v : img.data) v = std::clamp(v * scale, lo, hi);
    }
    if (rng.bernoulli(cfg.p_op) && cfg.delta > 0.0) {  // GammaAugment
        auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
        double lo = *lo_it, range = *hi_it - *lo_it;
        double gamma = rng.uniform(1.0 - d, 1.0 + d);
        if (range > 0.0) {
            // Map into [0,1] for the pow, then back to the original range so
            // the distorted view keeps the scale the network was normalised to.
            for (double& v : img.data) v = std::pow((v - lo) / range, gamma) * range + lo;
        }
    }
    return img;
}

}  // namespace scribseg
