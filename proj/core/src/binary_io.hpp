// Little-endian byte encoding shared by the partition and model file formats.

#pragma once

#include "vpsvm/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace vpsvm::detail {

class ByteWriter {
  public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) {
            out_.push_back(static_cast<char>((v >> s) & 0xFFU));
        }
    }
    void u64(std::uint64_t v) {
        for (int s = 0; s < 64; s += 8) {
            out_.push_back(static_cast<char>((v >> s) & 0xFFU));
        }
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::string_view bytes) { out_.append(bytes); }
    void f64s(const std::vector<double> &v) {
        u64(v.size());
        for (const double x : v) {
            f64(x);
        }
    }
    void u64s(const std::vector<std::size_t> &v) {
        u64(v.size());
        for (const std::size_t x : v) {
            u64(x);
        }
    }

    [[nodiscard]] std::string take() && { return std::move(out_); }

  private:
    std::string out_;
};

class ByteReader {
  public:
    ByteReader(std::string_view bytes, const char *what)
        : bytes_{ bytes }, what_{ what } {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const std::string_view b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8U) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    std::uint64_t u64() {
        const std::string_view b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8U) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view raw(std::size_t n) { return take(n); }

    /// Length prefix, checked against what remains so corrupt files fail cleanly.
    std::size_t count(std::size_t element_size) {
        const std::uint64_t n = u64();
        if (element_size != 0 && n > (bytes_.size() - pos_) / element_size) {
            fail("length field exceeds file size");
        }
        return static_cast<std::size_t>(n);
    }
    std::vector<double> f64s() {
        std::vector<double> v(count(8));
        for (double &x : v) {
            x = f64();
        }
        return v;
    }
    std::vector<std::size_t> u64s() {
        std::vector<std::size_t> v(count(8));
        for (std::size_t &x : v) {
            x = static_cast<std::size_t>(u64());
        }
        return v;
    }

    [[nodiscard]] bool done() const noexcept { return pos_ == bytes_.size(); }

    [[noreturn]] void fail(const std::string &message) const {
        throw parse_error(std::string{ what_ } + ": " + message + " (offset " + std::to_string(pos_) + ")");
    }

  private:
    std::string_view take(std::size_t n) {
        if (bytes_.size() - pos_ < n) {
            fail("unexpected end of data");
        }
        const std::string_view out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::string_view bytes_;
    std::size_t pos_{ 0 };
    const char *what_;
};

inline void write_bytes(const std::filesystem::path &path, const std::string &bytes) {
    std::ofstream out{ path, std::ios::binary };
    if (!out) {
        throw io_error("cannot write '" + path.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw io_error("write failed for '" + path.string() + "'");
    }
}

inline std::string read_bytes(const std::filesystem::path &path) {
    std::ifstream in{ path, std::ios::binary };
    if (!in) {
        throw io_error("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

}  // namespace vpsvm::detail
