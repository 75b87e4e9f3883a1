// SPDX-License-Identifier: Apache-2.0
//
// sblu: sparse Bayesian learning and its deep-unfolded variants for wideband
// hybrid mmWave massive MIMO channel estimation.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "sblu/autodiff/tensor.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

// SBLU container, all integers little-endian:
//   "SBLU"  u32 version  u64 meta_len  meta (key=value lines)  u32 n_tensors
//   per tensor: u32 name_len  name  u32 rank  u64 dims[rank]  u8 width (32|64)  payload

namespace sblu::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bytes that do not parse as a container.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr char kMagic[4] = {'S', 'B', 'L', 'U'};
inline constexpr std::uint32_t kFormatVersion = 1;

using Metadata = std::vector<std::pair<std::string, std::string>>;

struct NamedTensor {
    std::string name;
    ad::Tensor tensor;
    std::uint8_t width = 64; // stored scalar width; 32 rounds to float
};

struct Container {
    Metadata meta;
    std::vector<NamedTensor> tensors;

    const ad::Tensor* find(const std::string& name) const
    {
        for (const auto& t : tensors)
            if (t.name == name)
                return &t.tensor;
        return nullptr;
    }

    const ad::Tensor& at(const std::string& name) const
    {
        if (const auto* t = find(name))
            return *t;
        throw FormatError("container has no tensor named '" + name + "'");
    }

    const std::string* meta_value(const std::string& key) const
    {
        for (const auto& [k, v] : meta)
            if (k == key)
                return &v;
        return nullptr;
    }
};

namespace detail {

    template <class T>
    void put(std::string& out, T v)
    {
        static_assert(std::is_integral_v<T> || std::is_floating_point_v<T>);
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
        U u = std::bit_cast<U>(v);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out.push_back(static_cast<char>(u & 0xff));
            if constexpr (sizeof(T) > 1)
                u >>= 8;
        }
    }

    class Reader {
    public:
        explicit Reader(std::string_view b) : buf_(b) {}

        template <class T>
        T get()
        {
            using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
            need(sizeof(T));
            U u = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i)
                u |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
            pos_ += sizeof(T);
            return std::bit_cast<T>(u);
        }

        std::string bytes(std::size_t n)
        {
            need(n);
            std::string s(buf_.substr(pos_, n));
            pos_ += n;
            return s;
        }

        bool done() const { return pos_ == buf_.size(); }

    private:
        void need(std::size_t n) const
        {
            if (buf_.size() - pos_ < n)
                throw FormatError("container truncated at byte " + std::to_string(pos_));
        }
        std::string_view buf_;
        std::size_t pos_ = 0;
    };

} // namespace detail

inline std::string encode_metadata(const Metadata& meta)
{
    std::string out;
    for (const auto& [k, v] : meta) {
        if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw FormatError("metadata key/value not representable: '" + k + "'");
        out += k + "=" + v + "\n";
    }
    return out;
}

inline Metadata decode_metadata(const std::string& text)
{
    Metadata meta;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw FormatError("bad metadata line '" + line + "'");
        meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return meta;
}

inline std::string serialize(const Container& c)
{
    std::string out(kMagic, 4);
    detail::put(out, kFormatVersion);
    const std::string meta = encode_metadata(c.meta);
    detail::put(out, static_cast<std::uint64_t>(meta.size()));
    out += meta;
    detail::put(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& t : c.tensors) {
        if (t.width != 32 && t.width != 64)
            throw FormatError("tensor '" + t.name + "': width must be 32 or 64");
        detail::put(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        detail::put(out, static_cast<std::uint32_t>(t.tensor.rank()));
        for (auto d : t.tensor.shape)
            detail::put(out, static_cast<std::uint64_t>(d));
        detail::put(out, t.width);
        for (double v : t.tensor.data) {
            if (t.width == 64)
                detail::put(out, v);
            else
                detail::put(out, static_cast<float>(v));
        }
    }
    return out;
}

inline Container deserialize(std::string_view bytes)
{
    detail::Reader r(bytes);
    if (r.bytes(4) != std::string(kMagic, 4))
        throw FormatError("not an SBLU container (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion)
        throw FormatError("unsupported container version " + std::to_string(version));
    Container c;
    const auto meta_len = r.get<std::uint64_t>();
    c.meta = decode_metadata(r.bytes(static_cast<std::size_t>(meta_len)));
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        NamedTensor t;
        t.name = r.bytes(r.get<std::uint32_t>());
        const auto rank = r.get<std::uint32_t>();
        ad::Shape shape(rank);
        for (auto& d : shape)
            d = static_cast<std::size_t>(r.get<std::uint64_t>());
        t.width = r.get<std::uint8_t>();
        if (t.width != 32 && t.width != 64)
            throw FormatError("tensor '" + t.name + "': bad scalar width " + std::to_string(t.width));
        std::vector<double> data(ad::shape_size(shape));
        for (auto& v : data)
            v = t.width == 64 ? r.get<double>() : static_cast<double>(r.get<float>());
        t.tensor = ad::Tensor(std::move(shape), std::move(data));
        c.tensors.push_back(std::move(t));
    }
    if (!r.done())
        throw FormatError("trailing bytes after last tensor");
    return c;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for '" + path + "'");
}

inline void save_container(const std::string& path, const Container& c) { write_file(path, serialize(c)); }
inline Container load_container(const std::string& path) { return deserialize(read_file(path)); }

} // namespace sblu::io
