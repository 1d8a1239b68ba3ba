#include "gridmrf/pgm.hpp"

#include <cctype>
#include <stdexcept>
#include <string>

#include "gridmrf/io_util.hpp"

namespace gridmrf {

namespace {

// Consumes whitespace and '#' comments, then one unsigned decimal token.
int next_header_int(const std::string& data, std::size_t& pos, const char* what) {
    for (;;) {
        while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        if (pos < data.size() && data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    if (pos >= data.size() || !std::isdigit(static_cast<unsigned char>(data[pos])))
        throw std::runtime_error(std::string("pgm: expected ") + what);
    long v = 0;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
        v = v * 10 + (data[pos] - '0');
        if (v > 1'000'000'000) throw std::runtime_error("pgm: header value out of range");
        ++pos;
    }
    return static_cast<int>(v);
}

}  // namespace

PgmImage read_pgm(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '2' && data[1] != '5'))
        throw std::runtime_error("pgm: not a P2/P5 file: " + path.string());
    PgmImage img;
    img.binary = data[1] == '5';
    std::size_t pos = 2;
    img.cols = next_header_int(data, pos, "width");
    img.rows = next_header_int(data, pos, "height");
    img.maxval = next_header_int(data, pos, "maxval");
    if (img.cols < 1 || img.rows < 1 || img.maxval < 1 || img.maxval > 65535)
        throw std::runtime_error("pgm: bad dimensions/maxval");
    const std::size_t n = static_cast<std::size_t>(img.rows) * img.cols;
    img.pixels.resize(n);
    if (img.binary) {
        if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
            throw std::runtime_error("pgm: missing raster separator");
        ++pos;  // exactly one whitespace byte before the raster
        const int bytes = img.maxval > 255 ? 2 : 1;
        if (data.size() - pos < n * static_cast<std::size_t>(bytes))
            throw std::runtime_error("pgm: truncated raster");
        for (std::size_t i = 0; i < n; ++i) {
            int v = static_cast<unsigned char>(data[pos++]);
            if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(data[pos++]);
            img.pixels[i] = v;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) img.pixels[i] = next_header_int(data, pos, "pixel");
    }
    for (int v : img.pixels)
        if (v > img.maxval) throw std::runtime_error("pgm: pixel exceeds maxval");
    return img;
}

void write_pgm(const std::filesystem::path& path, const PgmImage& img) {
    const std::size_t n = static_cast<std::size_t>(img.rows) * img.cols;
    if (img.rows < 1 || img.cols < 1 || img.pixels.size() != n)
        throw std::invalid_argument("write_pgm: bad image shape");
    if (img.maxval < 1 || img.maxval > 65535) throw std::invalid_argument("write_pgm: bad maxval");
    for (int v : img.pixels)
        if (v < 0 || v > img.maxval) throw std::invalid_argument("write_pgm: pixel out of range");

    std::string out;
    out += img.binary ? "P5\n" : "P2\n";
    out += std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n";
    out += std::to_string(img.maxval) + "\n";
    if (img.binary) {
        const int bytes = img.maxval > 255 ? 2 : 1;
        out.reserve(out.size() + n * static_cast<std::size_t>(bytes));
        for (int v : img.pixels) {
            if (bytes == 2) out.push_back(static_cast<char>((v >> 8) & 0xff));
            out.push_back(static_cast<char>(v & 0xff));
        }
    } else {
        for (int r = 0; r < img.rows; ++r) {
            for (int c = 0; c < img.cols; ++c) {
                if (c) out.push_back(' ');
                out += std::to_string(img.pixels[static_cast<std::size_t>(r) * img.cols + c]);
            }
            out.push_back('\n');
        }
    }
    write_file_atomic(path, out);
}

}  // namespace gridmrf
