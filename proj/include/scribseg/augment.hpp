#pragma once

#include "scribseg/dataset.hpp"
#include "scribseg/rng.hpp"

namespace scribseg {

// Geometry + noise augmentation applied identically to image and labels.
struct CommonAugmentConfig {
    double p_zoom = 0.2;
    double zoom_lo = 0.85, zoom_hi = 1.25;
    double p_elastic = 0.2;
    int elastic_grid = 3;          // control points per axis
    double elastic_sigma_px = 4.0; // displacement std-dev in pixels
    double p_rotate = 0.2;
    double rotate_deg = 30.0;      // angle drawn from U(-rotate_deg, +rotate_deg)
    double p_hflip = 0.5;
    double p_vflip = 0.5;
    double p_noise = 0.15;
    double noise_sigma_max = 0.1;
    int crop_h = 0, crop_w = 0;    // 0 means "keep the input size"

    void validate() const {
        for (double p : {p_zoom, p_elastic, p_rotate, p_hflip, p_vflip, p_noise})
            if (p < 0.0 || p > 1.0)
                throw std::invalid_argument("CommonAugmentConfig: probability out of [0,1]");
        if (zoom_lo > zoom_hi || zoom_lo <= 0.0)
            throw std::invalid_argument("CommonAugmentConfig: bad zoom range");
        if (rotate_deg < 0.0 || elastic_sigma_px < 0.0 || noise_sigma_max < 0.0)
            throw std::invalid_argument("CommonAugmentConfig: negative magnitude");
    }
};

// Photometric distortion strength for the second branch.
struct FurtherAugmentConfig {
    double delta = 1.0;  // strength; 0 disables the branch's distortions
    double p_op = 0.8;   // per-operation application probability

    void validate() const {
        if (delta < 0.0 || delta > 1.0)
            throw std::invalid_argument("FurtherAugmentConfig: delta out of [0,1]");
        if (p_op < 0.0 || p_op > 1.0)
            throw std::invalid_argument("FurtherAugmentConfig: p_op out of [0,1]");
    }
};

// Z-score normalize, then zoom / elastic / rotation / flips, then random crop
// or pad to the configured size, then additive Gaussian noise.
ImageSample apply_common(const ImageSample& sample, const CommonAugmentConfig& cfg, Rng& rng);

// Sequential Brightness, Contrast, GammaAugment; labels untouched.
Image2D apply_further(const Image2D& image, const FurtherAugmentConfig& cfg, Rng& rng);

}  // namespace scribseg
