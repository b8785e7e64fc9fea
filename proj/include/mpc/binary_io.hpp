#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "mpc/error.hpp"

namespace mpc::binary {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

class Writer {
public:
    template <typename T>
    void put(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void bytes(std::string_view s) { out_.append(s); }
    const std::string& str() const { return out_; }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void expect_magic(std::string_view magic) {
        if (data_.size() < magic.size() && magic.substr(0, data_.size()) == data_)
            throw Error(ErrorCode::TruncatedFile, what_ + ": file ends inside the magic");
        if (data_.size() < magic.size() || data_.substr(0, magic.size()) != magic)
            throw Error(ErrorCode::BadMagic, what_ + ": expected magic \"" + std::string(magic) + "\"");
        pos_ += magic.size();
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw Error(ErrorCode::TruncatedFile, what_ + ": truncated at byte " + std::to_string(pos_));
    }

    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace mpc::binary
