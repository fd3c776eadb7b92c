#pragma once

#include "scribseg/dataset.hpp"

namespace scribseg {

// Bilinear resample of an intensity image from src to dst pixel spacing.
Image2D resample_image(const Image2D& img, double src_sp_r, double src_sp_c,
                       double dst_sp_r, double dst_sp_c);

// Nearest-neighbor resample for label maps (keeps values valid class indices).
LabelArray resample_labels(const LabelArray& labels, double src_sp_r, double src_sp_c,
                           double dst_sp_r, double dst_sp_c);

// Symmetric center crop or pad to (out_h, out_w) with the given fill value.
template <typename T>
Array2D<T> center_crop_pad(const Array2D<T>& in, int out_h, int out_w, T fill);

// Resample to the spec's target spacing, then center crop/pad to the target
// size. Image pads with 0, scribble with kUnlabeled, gt with background.
ImageSample preprocess(const ImageSample& sample, const DatasetSpec& spec);

}  // namespace scribseg
