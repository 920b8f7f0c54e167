#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace brushwork::imageio {

/// Row-major interleaved RGB raster, 8 bits per channel.
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3

    ColorImage() = default;
    ColorImage(int w, int h);

    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    bool operator==(const ColorImage&) const = default;
};

/// Row-major 8-bit luma raster.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const GrayImage&) const = default;
};

enum class Label { Positive, Negative };

std::string to_string(Label label);

struct ManifestEntry {
    std::string image_path;
    Label label = Label::Positive;

    bool operator==(const ManifestEntry&) const = default;
};

/// Labeled image list. Relative paths resolve against `base_dir`, the
/// directory the manifest was loaded from.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ManifestEntry& entry) const;
    std::size_t count(Label label) const;
};

/// Decodes a PNG or JPEG. Gray sources are replicated into all three
/// channels; an alpha channel is dropped.
ColorImage load_image(const std::filesystem::path& path);

/// ITU-R BT.601 luma, rounded half up: (299 R + 587 G + 114 B + 500) / 1000.
GrayImage to_grayscale(const ColorImage& img);

/// Gray to RGB by channel replication.
ColorImage replicate(const GrayImage& img);

/// Lossless PNG encodings. Output bytes depend only on the pixels.
std::vector<std::uint8_t> encode_png(const ColorImage& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void save_png(const ColorImage& img, const std::filesystem::path& path);
void save_png(const GrayImage& img, const std::filesystem::path& path);

/// CSV with header `path,label`; labels are `positive` / `negative`, any case.
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace brushwork::imageio
