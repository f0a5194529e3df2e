#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "atnf/common.hpp"

namespace atnf::io {

/// Little-endian binary writer backed by a growable buffer.
class Writer {
public:
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
    void bytes(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void f32_span(std::span<const float> v) {
        for (float x : v) f32(x);
    }

    const std::vector<uint8_t>& data() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    std::vector<uint8_t> buf_;
};

/// Little-endian reader that throws IoError on truncation.
class Reader {
public:
    explicit Reader(std::span<const uint8_t> data, std::string what = "stream")
        : data_(data), what_(std::move(what)) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    void raw(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void f32_into(std::span<float> out) {
        need(out.size() * 4);
        for (float& x : out) x = f32();
    }
    bool at_end() const { return pos_ == data_.size(); }
    size_t remaining() const { return data_.size() - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > data_.size())
            throw IoError(what_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ", have " + std::to_string(data_.size() - pos_) +
                          ")");
    }

    std::span<const uint8_t> data_;
    size_t pos_ = 0;
    std::string what_;
};

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> data);

}  // namespace atnf::io
