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

#include "sblu/core.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sblu::io {

/// Shortest round-trip decimal form, independent of the global locale.
inline std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& s)
{
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw ConfigError("not a number: '" + s + "'");
    return v;
}

inline std::uint64_t parse_count(const std::string& s)
{
    std::uint64_t v = 0;
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw ConfigError("not a non-negative integer: '" + s + "'");
    return v;
}

/// Ordered key=value pairs. '#' starts a comment; whitespace around keys and values is dropped.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline KeyValues parse_key_values(const std::string& text)
{
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        kv.emplace_back(std::move(key), trim(line.substr(eq + 1)));
    }
    return kv;
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',')
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty())
            out.push_back(cur);
    }
    return out;
}

inline constexpr const char* kCsvHeader = "estimator,sweep_param,sweep_value,nmse_mean,trials,flops,seconds";

struct ResultRow {
    std::string estimator;
    std::string sweep_param;
    double sweep_value = 0.0;
    double nmse_mean = 0.0;
    std::size_t trials = 0;
    double flops = 0.0;
    double seconds = 0.0;
};

inline std::string to_csv(const std::vector<ResultRow>& rows)
{
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows)
        out += r.estimator + "," + r.sweep_param + "," + format_number(r.sweep_value) + "," + format_number(r.nmse_mean) + "," +
               std::to_string(r.trials) + "," + format_number(r.flops) + "," + format_number(r.seconds) + "\n";
    return out;
}

inline std::vector<ResultRow> from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader)
        throw ConfigError("csv: unexpected header");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ','))
            f.push_back(cell);
        if (f.size() != 7)
            throw ConfigError("csv: expected 7 fields in '" + line + "'");
        rows.push_back({f[0], f[1], parse_number(f[2]), parse_number(f[3]), static_cast<std::size_t>(parse_count(f[4])),
                        parse_number(f[5]), parse_number(f[6])});
    }
    return rows;
}

} // namespace sblu::io
