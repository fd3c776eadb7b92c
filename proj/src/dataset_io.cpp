#include "scribseg/dataset_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace scribseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slice_base(const ImageSample& s) { return std::to_string(s.slice_index); }

cv::Mat image_to_png16(const Image2D& img) {
    cv::Mat m(img.rows, img.cols, CV_16UC1);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double v = std::clamp(img.at(r, c), 0.0, 1.0);
            m.at<uint16_t>(r, c) = static_cast<uint16_t>(std::llround(v * 65535.0));
        }
    return m;
}

cv::Mat labels_to_png8(const LabelArray& l) {
    cv::Mat m(l.rows, l.cols, CV_8UC1);
    for (int r = 0; r < l.rows; ++r)
        for (int c = 0; c < l.cols; ++c) m.at<uint8_t>(r, c) = l.at(r, c);
    return m;
}

Image2D png16_to_image(const cv::Mat& m) {
    Image2D img(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) img.at(r, c) = m.at<uint16_t>(r, c) / 65535.0;
    return img;
}

LabelArray png8_to_labels(const cv::Mat& m) {
    LabelArray l(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) l.at(r, c) = m.at<uint8_t>(r, c);
    return l;
}

cv::Mat read_png(const fs::path& p, int expected_type) {
    cv::Mat m = cv::imread(p.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("dataset: cannot read " + p.string());
    if (m.type() != expected_type)
        throw std::runtime_error("dataset: unexpected pixel type in " + p.string());
    return m;
}

}  // namespace

void save_dataset(const std::vector<ImageSample>& samples, const std::string& root,
                  int num_classes, const std::vector<std::string>& class_names) {
    fs::create_directories(root);
    json slices = json::array();
    for (const auto& s : samples) {
        s.validate();
        fs::path dir = fs::path(root) / s.patient_id;
        fs::create_directories(dir);
        const std::string base = slice_base(s);
        if (!cv::imwrite((dir / (base + "_img.png")).string(), image_to_png16(s.image)))
            throw std::runtime_error("dataset: failed to write image for " + s.patient_id);
        cv::imwrite((dir / (base + "_scrib.png")).string(), labels_to_png8(s.scribble.labels));
        if (s.gt_mask) cv::imwrite((dir / (base + "_gt.png")).string(), labels_to_png8(*s.gt_mask));
        slices.push_back({{"patient", s.patient_id},
                          {"slice", s.slice_index},
                          {"spacing", {s.spacing_row_mm, s.spacing_col_mm}},
                          {"has_gt", s.gt_mask.has_value()}});
    }
    json manifest = {{"schema_version", 1},
                     {"num_classes", num_classes},
                     {"class_names", class_names},
                     {"slices", std::move(slices)}};
    std::ofstream f(fs::path(root) / "dataset.json");
    f << manifest.dump(2) << "\n";
    if (!f) throw std::runtime_error("dataset: failed to write manifest in " + root);
}

DatasetManifest read_manifest(const std::string& root) {
    std::ifstream f(fs::path(root) / "dataset.json");
    if (!f) throw std::runtime_error("dataset: missing dataset.json in " + root);
    json manifest = json::parse(f);
    DatasetManifest m;
    m.num_classes = manifest.at("num_classes").get<int>();
    m.class_names = manifest.value("class_names", std::vector<std::string>{});
    return m;
}

std::vector<ImageSample> load_dataset(const std::string& root) {
    std::ifstream f(fs::path(root) / "dataset.json");
    if (!f) throw std::runtime_error("dataset: missing dataset.json in " + root);
    json manifest = json::parse(f);
    const int num_classes = manifest.at("num_classes").get<int>();

    std::vector<ImageSample> out;
    for (const auto& rec : manifest.at("slices")) {
        ImageSample s;
        s.patient_id = rec.at("patient").get<std::string>();
        s.slice_index = rec.at("slice").get<int>();
        s.spacing_row_mm = rec.at("spacing")[0].get<double>();
        s.spacing_col_mm = rec.at("spacing")[1].get<double>();
        fs::path dir = fs::path(root) / s.patient_id;
        const std::string base = std::to_string(s.slice_index);
        s.image = png16_to_image(read_png(dir / (base + "_img.png"), CV_16UC1));
        s.scribble.labels = png8_to_labels(read_png(dir / (base + "_scrib.png"), CV_8UC1));
        s.scribble.num_classes = num_classes;
        if (rec.value("has_gt", false))
            s.gt_mask = png8_to_labels(read_png(dir / (base + "_gt.png"), CV_8UC1));
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> patient_ids_of(const std::vector<ImageSample>& samples) {
    std::vector<std::string> ids;
    for (const auto& s : samples)
        if (std::find(ids.begin(), ids.end(), s.patient_id) == ids.end())
            ids.push_back(s.patient_id);
    return ids;
}

}  // namespace scribseg
