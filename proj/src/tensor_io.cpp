#include "elmfit/tensor.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

namespace elmfit {

bool SignalTensor::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void SignalTensor::record_range() {
    if (values.empty()) {
        value_min = value_max = 0.0;
        return;
    }
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    value_min = lo;
    value_max = hi;
}

namespace {

constexpr char kMagic[4] = {'E', 'T', 'N', 'S'};

void put_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

void put_f32_le(std::ostream& os, float f) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                          static_cast<unsigned char>((u >> 8) & 0xff),
                          static_cast<unsigned char>((u >> 16) & 0xff),
                          static_cast<unsigned char>((u >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

SignalTensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_io("cannot open tensor file: " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) fail_io("bad magic in " + path);

    unsigned char version = 0, dtype = 0, rank = 0;
    is.read(reinterpret_cast<char*>(&version), 1);
    is.read(reinterpret_cast<char*>(&dtype), 1);
    is.read(reinterpret_cast<char*>(&rank), 1);
    if (!is) fail_io("truncated header in " + path);
    if (version != 1) fail_io("unsupported tensor version " + std::to_string(version));
    if (dtype != 0) fail_io("unsupported tensor dtype " + std::to_string(dtype));
    if (rank < 2 || rank > 4) fail_io("unsupported tensor rank " + std::to_string(rank));

    std::vector<std::int64_t> dims(rank);
    std::uint64_t count = 1;
    for (int a = 0; a < rank; ++a) {
        std::uint64_t d = get_u64_le(is);
        if (!is || d == 0) fail_io("invalid dimension in " + path);
        dims[a] = static_cast<std::int64_t>(d);
        count *= d;
    }

    std::vector<unsigned char> raw(count * 4);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::uint64_t>(is.gcount()) != raw.size()) fail_io("truncated payload in " + path);
    if (is.peek() != std::char_traits<char>::eof())
        fail_io("payload size mismatch in " + path);

    SignalTensor t;
    // rank 2 = H x W; rank 3 with a small third dim = H x W x C, otherwise
    // H x W x T; rank 4 = H x W x T x C (a T of 1 is squeezed).
    if (rank == 2) {
        t.shape = {dims[0], dims[1]};
        t.channels = 1;
    } else if (rank == 3) {
        if (dims[2] <= 4) {
            t.shape = {dims[0], dims[1]};
            t.channels = dims[2];
        } else {
            t.shape = {dims[0], dims[1], dims[2]};
            t.channels = 1;
        }
    } else {
        if (dims[2] == 1)
            t.shape = {dims[0], dims[1]};
        else
            t.shape = {dims[0], dims[1], dims[2]};
        t.channels = dims[3];
    }

    t.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) |
                          (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                          (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                          (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
        float f = std::bit_cast<float>(u);
        if (!std::isfinite(f)) fail_io("non-finite value in " + path);
        t.values[i] = static_cast<double>(f);
    }
    t.record_range();
    return t;
}

void save_tensor(const SignalTensor& t, const std::string& path) {
    if (t.shape.size() < 2 || t.shape.size() > 3) fail_usage("tensor must have 2 or 3 axes");
    if (t.channels < 1) fail_usage("tensor must have at least one channel");
    if (t.size() != static_cast<std::int64_t>(t.values.size()))
        fail_usage("tensor value count does not match shape");

    std::vector<std::int64_t> dims(t.shape.begin(), t.shape.end());
    if (t.shape.size() == 2) {
        if (t.channels > 1 && t.channels <= 4)
            dims.push_back(t.channels);
        else if (t.channels > 4) {
            dims.push_back(1);
            dims.push_back(t.channels);
        }
    } else {
        // temporal volume: always rank 4 when the third axis could be read
        // back as channels, or when channels > 1
        if (t.channels > 1 || t.shape[2] <= 4) dims.push_back(t.channels);
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot write tensor file: " + path);
    os.write(kMagic, 4);
    unsigned char version = 1, dtype = 0, rank = static_cast<unsigned char>(dims.size());
    os.write(reinterpret_cast<const char*>(&version), 1);
    os.write(reinterpret_cast<const char*>(&dtype), 1);
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (auto d : dims) put_u64_le(os, static_cast<std::uint64_t>(d));
    for (double v : t.values) put_f32_le(os, static_cast<float>(v));
    if (!os) fail_io("write failed: " + path);
}

namespace {

struct PngReader {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriter {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

}  // namespace

SignalTensor load_image(const std::string& path) {
    PngReader r;
    r.fp = std::fopen(path.c_str(), "rb");
    if (!r.fp) fail_io("cannot open image: " + path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        fail_io("not a PNG file: " + path);

    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) fail_io("png init failure");
    r.info = png_create_info_struct(r.png);
    if (!r.info) fail_io("png init failure");
    if (setjmp(png_jmpbuf(r.png))) fail_io("corrupt PNG: " + path);

    png_init_io(r.png, r.fp);
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);

    const png_uint_32 width = png_get_image_width(r.png, r.info);
    const png_uint_32 height = png_get_image_height(r.png, r.info);
    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);

    if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)
        fail_io("unsupported PNG color type (need 8/16-bit gray or RGB): " + path);
    if (bit_depth != 8 && bit_depth != 16)
        fail_io("unsupported PNG bit depth " + std::to_string(bit_depth) + ": " + path);

    const int channels = (color_type == PNG_COLOR_TYPE_RGB) ? 3 : 1;
    const int interlace = png_set_interlace_handling(r.png);
    png_read_update_info(r.png, r.info);

    const std::size_t row_bytes = png_get_rowbytes(r.png, r.info);
    std::vector<unsigned char> data(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + y * row_bytes;
    for (int pass = 0; pass < interlace; ++pass)
        png_read_rows(r.png, rows.data(), nullptr, height);
    png_read_end(r.png, nullptr);

    SignalTensor t({static_cast<std::int64_t>(height), static_cast<std::int64_t>(width)},
                   channels);
    const double denom = (bit_depth == 8) ? 255.0 : 65535.0;
    std::size_t out = 0;
    for (png_uint_32 y = 0; y < height; ++y) {
        const unsigned char* row = rows[y];
        const std::size_t n = static_cast<std::size_t>(width) * channels;
        if (bit_depth == 8) {
            for (std::size_t i = 0; i < n; ++i) t.values[out++] = row[i] / denom;
        } else {
            // PNG stores 16-bit samples big-endian
            for (std::size_t i = 0; i < n; ++i) {
                unsigned v = (static_cast<unsigned>(row[2 * i]) << 8) | row[2 * i + 1];
                t.values[out++] = v / denom;
            }
        }
    }
    t.record_range();
    return t;
}

void save_image(const SignalTensor& t, const std::string& path) {
    if (t.shape.size() != 2) fail_usage("image export requires a 2-axis tensor");
    if (t.channels != 1 && t.channels != 3)
        fail_usage("image export supports 1 or 3 channels, got " + std::to_string(t.channels));

    PngWriter w;
    w.fp = std::fopen(path.c_str(), "wb");
    if (!w.fp) fail_io("cannot write image: " + path);
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) fail_io("png init failure");
    w.info = png_create_info_struct(w.png);
    if (!w.info) fail_io("png init failure");
    if (setjmp(png_jmpbuf(w.png))) fail_io("png write failure: " + path);

    const auto height = static_cast<png_uint_32>(t.shape[0]);
    const auto width = static_cast<png_uint_32>(t.shape[1]);
    png_init_io(w.png, w.fp);
    png_set_IHDR(w.png, w.info, width, height, 8,
                 t.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);

    const std::size_t n = static_cast<std::size_t>(width) * t.channels;
    std::vector<unsigned char> row(n);
    std::size_t in = 0;
    for (png_uint_32 y = 0; y < height; ++y) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = t.values[in++];
            v = std::min(1.0, std::max(0.0, v));
            // quantization rule: floor(v*255 + 0.5), clamp
            double q = std::floor(v * 255.0 + 0.5);
            row[i] = static_cast<unsigned char>(std::min(255.0, std::max(0.0, q)));
        }
        png_write_row(w.png, row.data());
    }
    png_write_end(w.png, nullptr);
}

}  // namespace elmfit
