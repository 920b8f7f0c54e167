#include "brushwork/imageio.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <unordered_set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "brushwork/error.hpp"
#include "brushwork/fsutil.hpp"

namespace brushwork::imageio {

namespace fs = std::filesystem;

ColorImage::ColorImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

std::string to_string(Label label) { return label == Label::Positive ? "positive" : "negative"; }

fs::path DatasetManifest::resolve(const ManifestEntry& entry) const {
    const fs::path p(entry.image_path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

std::size_t DatasetManifest::count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [label](const auto& e) { return e.label == label; }));
}

namespace {

bool has_prefix(const std::vector<std::uint8_t>& bytes, std::initializer_list<std::uint8_t> magic) {
    return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin());
}

}  // namespace

ColorImage load_image(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
    const std::vector<std::uint8_t> bytes = read_file(path);

    const bool png = has_prefix(bytes, {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'});
    const bool jpeg = has_prefix(bytes, {0xff, 0xd8, 0xff});
    if (!png && !jpeg) throw Error(ErrorCode::UnsupportedFormat, path.string());

    cv::Mat decoded;
    try {
        decoded = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception&) {
        decoded.release();
    }
    if (decoded.empty()) throw Error(ErrorCode::CorruptImage, path.string());
    if (decoded.depth() != CV_8U) throw Error(ErrorCode::UnsupportedFormat, path.string() + " (not 8-bit)");

    ColorImage out(decoded.cols, decoded.rows);
    const int channels = decoded.channels();
    if (channels != 1 && channels != 2 && channels != 3 && channels != 4) {
        throw Error(ErrorCode::UnsupportedFormat, path.string() + " (channel count)");
    }
    for (int y = 0; y < decoded.rows; ++y) {
        const std::uint8_t* row = decoded.ptr<std::uint8_t>(y);
        for (int x = 0; x < decoded.cols; ++x) {
            const std::uint8_t* src = row + static_cast<std::size_t>(x) * channels;
            std::uint8_t* dst = out.at(x, y);
            if (channels <= 2) {
                dst[0] = dst[1] = dst[2] = src[0];
            } else {
                // OpenCV stores BGR(A)
                dst[0] = src[2];
                dst[1] = src[1];
                dst[2] = src[0];
            }
        }
    }
    return out;
}

GrayImage to_grayscale(const ColorImage& img) {
    GrayImage out(img.width, img.height);
    const std::size_t n = out.pixels.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t r = img.pixels[3 * i];
        const std::uint32_t g = img.pixels[3 * i + 1];
        const std::uint32_t b = img.pixels[3 * i + 2];
        out.pixels[i] = static_cast<std::uint8_t>(std::min<std::uint32_t>(255, (299 * r + 587 * g + 114 * b + 500) / 1000));
    }
    return out;
}

ColorImage replicate(const GrayImage& img) {
    ColorImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = img.pixels[i];
    }
    return out;
}

namespace {

std::vector<std::uint8_t> encode(const cv::Mat& mat) {
    std::vector<std::uint8_t> bytes;
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", mat, bytes, params)) throw Error(ErrorCode::IoError, "PNG encoding failed");
    return bytes;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ColorImage& img) {
    cv::Mat mat(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        std::uint8_t* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* src = img.at(x, y);
            row[3 * x] = src[2];
            row[3 * x + 1] = src[1];
            row[3 * x + 2] = src[0];
        }
    }
    return encode(mat);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    // cv::Mat over const data is read-only here; imencode never writes
    const cv::Mat mat(img.height, img.width, CV_8UC1, const_cast<std::uint8_t*>(img.pixels.data()));
    return encode(mat);
}

void save_png(const ColorImage& img, const fs::path& path) { write_file_atomic(path, encode_png(img)); }

void save_png(const GrayImage& img, const fs::path& path) { write_file_atomic(path, encode_png(img)); }

namespace {

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));

    DatasetManifest manifest;
    manifest.base_dir = path.parent_path();

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = trim(line);
        if (line_no == 1 && text.starts_with("\xEF\xBB\xBF")) text = trim(text.substr(3));
        if (text.empty()) continue;
        if (!header_seen) {
            if (lower(text) != "path,label") {
                throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected header `path,label`");
            }
            header_seen = true;
            continue;
        }
        const auto comma = text.find(',');
        if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos) {
            throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
        }
        std::string image = trim(std::string_view(text).substr(0, comma));
        std::string label_text = trim(std::string_view(text).substr(comma + 1));
        if (image.empty() || label_text.empty()) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no));

        Label label;
        const std::string l = lower(label_text);
        if (l == "positive") {
            label = Label::Positive;
        } else if (l == "negative") {
            label = Label::Negative;
        } else {
            throw Error(ErrorCode::UnknownLabel, label_text);
        }
        if (!seen.insert(image).second) throw Error(ErrorCode::DuplicatePath, image);
        manifest.entries.push_back({std::move(image), label});
    }
    if (!header_seen) throw Error(ErrorCode::MalformedRow, "line 1: missing header `path,label`");
    return manifest;
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::string out = "path,label\n";
    for (const auto& e : manifest.entries) out += e.image_path + "," + to_string(e.label) + "\n";
    return out;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    write_file_atomic(path, format_manifest(manifest));
}

}  // namespace brushwork::imageio
