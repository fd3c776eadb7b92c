#include "scribseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace scribseg {

namespace {

int resampled_extent(int n, double src_sp, double dst_sp) {
    return std::max(1, static_cast<int>(std::llround(n * src_sp / dst_sp)));
}

// Center of output pixel r in source index coordinates.
double src_coord(int r, double dst_sp, double src_sp) {
    return (r + 0.5) * dst_sp / src_sp - 0.5;
}

}  // namespace

Image2D resample_image(const Image2D& img, double src_sp_r, double src_sp_c,
                       double dst_sp_r, double dst_sp_c) {
    if (src_sp_r <= 0 || src_sp_c <= 0 || dst_sp_r <= 0 || dst_sp_c <= 0)
        throw std::invalid_argument("resample_image: non-positive spacing");
    const int oh = resampled_extent(img.rows, src_sp_r, dst_sp_r);
    const int ow = resampled_extent(img.cols, src_sp_c, dst_sp_c);
    if (oh == img.rows && ow == img.cols && src_sp_r == dst_sp_r && src_sp_c == dst_sp_c)
        return img;
    Image2D out(oh, ow);
    for (int r = 0; r < oh; ++r) {
        double sr = std::clamp(src_coord(r, dst_sp_r, src_sp_r), 0.0, img.rows - 1.0);
        int r0 = static_cast<int>(std::floor(sr));
        int r1 = std::min(r0 + 1, img.rows - 1);
        double fr = sr - r0;
        for (int c = 0; c < ow; ++c) {
            double sc = std::clamp(src_coord(c, dst_sp_c, src_sp_c), 0.0, img.cols - 1.0);
            int c0 = static_cast<int>(std::floor(sc));
            int c1 = std::min(c0 + 1, img.cols - 1);
            double fc = sc - c0;
            out.at(r, c) = (1 - fr) * ((1 - fc) * img.at(r0, c0) + fc * img.at(r0, c1)) +
                           fr * ((1 - fc) * img.at(r1, c0) + fc * img.at(r1, c1));
        }
    }
    return out;
}

LabelArray resample_labels(const LabelArray& labels, double src_sp_r, double src_sp_c,
                           double dst_sp_r, double dst_sp_c) {
    if (src_sp_r <= 0 || src_sp_c <= 0 || dst_sp_r <= 0 || dst_sp_c <= 0)
        throw std::invalid_argument("resample_labels: non-positive spacing");
    const int oh = resampled_extent(labels.rows, src_sp_r, dst_sp_r);
    const int ow = resampled_extent(labels.cols, src_sp_c, dst_sp_c);
    if (oh == labels.rows && ow == labels.cols) return labels;
    LabelArray out(oh, ow);
    for (int r = 0; r < oh; ++r) {
        int sr = std::clamp(static_cast<int>(std::llround(src_coord(r, dst_sp_r, src_sp_r))), 0,
                            labels.rows - 1);
        for (int c = 0; c < ow; ++c) {
            int sc = std::clamp(static_cast<int>(std::llround(src_coord(c, dst_sp_c, src_sp_c))), 0,
                                labels.cols - 1);
            out.at(r, c) = labels.at(sr, sc);
        }
    }
    return out;
}

template <typename T>
Array2D<T> center_crop_pad(const Array2D<T>& in, int out_h, int out_w, T fill) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("center_crop_pad: non-positive size");
    if (in.rows == out_h && in.cols == out_w) return in;
    Array2D<T> out(out_h, out_w, fill);
    // Offset of the output origin in input coordinates (negative when padding).
    const int off_r = (in.rows - out_h) / 2;
    const int off_c = (in.cols - out_w) / 2;
    for (int r = 0; r < out_h; ++r) {
        const int sr = r + off_r;
        if (sr < 0 || sr >= in.rows) continue;
        for (int c = 0; c < out_w; ++c) {
            const int sc = c + off_c;
            if (sc >= 0 && sc < in.cols) out.at(r, c) = in.at(sr, sc);
        }
    }
    return out;
}

template Array2D<double> center_crop_pad(const Array2D<double>&, int, int, double);
template Array2D<uint8_t> center_crop_pad(const Array2D<uint8_t>&, int, int, uint8_t);

ImageSample preprocess(const ImageSample& sample, const DatasetSpec& spec) {
    sample.validate();
    spec.validate();

    ImageSample out = sample;
    out.image = resample_image(sample.image, sample.spacing_row_mm, sample.spacing_col_mm,
                               spec.target_spacing_row_mm, spec.target_spacing_col_mm);
    out.scribble.labels =
        resample_labels(sample.scribble.labels, sample.spacing_row_mm, sample.spacing_col_mm,
                        spec.target_spacing_row_mm, spec.target_spacing_col_mm);
    if (sample.gt_mask)
        out.gt_mask = resample_labels(*sample.gt_mask, sample.spacing_row_mm, sample.spacing_col_mm,
                                      spec.target_spacing_row_mm, spec.target_spacing_col_mm);

    out.image = center_crop_pad(out.image, spec.target_height, spec.target_width, 0.0);
    out.scribble.labels =
        center_crop_pad(out.scribble.labels, spec.target_height, spec.target_width, kUnlabeled);
    if (out.gt_mask)
        out.gt_mask = center_crop_pad(*out.gt_mask, spec.target_height, spec.target_width,
                                      static_cast<uint8_t>(0));

    out.spacing_row_mm = spec.target_spacing_row_mm;
    out.spacing_col_mm = spec.target_spacing_col_mm;
    return out;
}

}  // namespace scribseg
