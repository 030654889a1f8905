#include "facepipe/image.hpp"

#include <opencv2/imgcodecs.hpp>

#include "facepipe/errors.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

Image load_image(const std::filesystem::path& path) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw IoError("cannot decode image: " + path.string());
    return img;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (img.empty()) throw IoError("cannot decode image payload (" +
                                   std::to_string(bytes.size()) + " bytes)");
    return img;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", image, out)) throw IoError("PNG encoding failed");
    return out;
}

void save_png(const std::filesystem::path& path, const Image& image) {
    write_file_bytes(path, encode_png(image));
}

std::string sniff_image_format(std::span<const std::uint8_t> bytes) {
    static const std::uint8_t png_magic[4] = {0x89, 'P', 'N', 'G'};
    if (bytes.size() >= 4 && std::equal(png_magic, png_magic + 4, bytes.begin())) return "png";
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return "jpeg";
    return "bin";
}

Image solid_color_image(int width, int height, std::uint8_t b, std::uint8_t g, std::uint8_t r) {
    return cv::Mat(height, width, CV_8UC3, cv::Scalar(b, g, r)).clone();
}

} // namespace facepipe
