#pragma once

#include <filesystem>
#include <vector>

namespace gridmrf {

struct PgmImage {
    int rows = 0;
    int cols = 0;
    int maxval = 0;
    bool binary = true;       // written as P5 when true, P2 when false
    std::vector<int> pixels;  // row-major, values in [0, maxval]
};

PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const PgmImage& img);

}  // namespace gridmrf
