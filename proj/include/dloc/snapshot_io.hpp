#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dloc/channel.hpp"
#include "dloc/common.hpp"

// Snapshot datasets.
//
// Binary layout (little-endian):
//   magic    8 bytes  "DLOCSNAP"
//   version  u32      1
//   M        u32      number of stations
//   N_m      u32 x M  antennas per station
//   count    u64      number of records
//   record   f64 snr_db, f64 true_x, f64 true_y,
//            then sum(N_m) samples as interleaved f64 (re, im), station-major
//
// CSV layout: one comment line
//   # dloc-snapshots v1 antennas=N_1;N_2;...
// then a header row
//   record,snr_db,true_x,true_y,s1_n0_re,s1_n0_im,...
// and one row per record, values printed with 17 significant digits.

namespace dloc {

struct SnapshotRecord
{
    ReceivedSignal signal;
    Point2 true_position;
};

struct SnapshotSet
{
    std::vector<int> antennas; // N_m per station
    std::vector<SnapshotRecord> records;
};

inline constexpr char snapshot_magic[8] = {'D', 'L', 'O', 'C', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t snapshot_version = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in)
{
    T v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw ParseError("snapshot file: truncated");
    return v;
}

inline std::vector<Index> offsets_for(const std::vector<int>& antennas)
{
    std::vector<Index> off{0};
    for (int n : antennas)
        off.push_back(off.back() + n);
    return off;
}

} // namespace detail

inline void write_snapshots_binary(const SnapshotSet& set, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out.write(snapshot_magic, sizeof snapshot_magic);
    detail::put<std::uint32_t>(out, snapshot_version);
    detail::put<std::uint32_t>(out, std::uint32_t(set.antennas.size()));
    for (int n : set.antennas)
        detail::put<std::uint32_t>(out, std::uint32_t(n));
    detail::put<std::uint64_t>(out, set.records.size());
    for (const auto& r : set.records) {
        detail::put(out, r.signal.snr_db);
        detail::put(out, r.true_position.x);
        detail::put(out, r.true_position.y);
        for (Index i = 0; i < r.signal.y.size(); ++i) {
            detail::put(out, r.signal.y[i].real());
            detail::put(out, r.signal.y[i].imag());
        }
    }
    if (!out)
        throw ConfigError("failed writing " + path.string());
}

inline SnapshotSet read_snapshots_binary(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, snapshot_magic, sizeof magic) != 0)
        throw ParseError(path.string() + ": not a snapshot file (bad magic)");
    const auto version = detail::take<std::uint32_t>(in);
    if (version != snapshot_version)
        throw ParseError(path.string() + ": unsupported snapshot version " + std::to_string(version));
    SnapshotSet set;
    const auto M = detail::take<std::uint32_t>(in);
    if (M == 0 || M > 4096)
        throw ParseError(path.string() + ": implausible station count");
    for (std::uint32_t m = 0; m < M; ++m) {
        const auto n = detail::take<std::uint32_t>(in);
        if (n == 0 || n > (1u << 20))
            throw ParseError(path.string() + ": implausible antenna count");
        set.antennas.push_back(int(n));
    }
    const auto count = detail::take<std::uint64_t>(in);
    const auto offsets = detail::offsets_for(set.antennas);
    for (std::uint64_t r = 0; r < count; ++r) {
        SnapshotRecord rec;
        rec.signal.offsets = offsets;
        rec.signal.snr_db = detail::take<double>(in);
        rec.true_position.x = detail::take<double>(in);
        rec.true_position.y = detail::take<double>(in);
        rec.signal.y.resize(offsets.back());
        for (Index i = 0; i < offsets.back(); ++i) {
            const double re = detail::take<double>(in);
            const double im = detail::take<double>(in);
            rec.signal.y[i] = {re, im};
        }
        set.records.push_back(std::move(rec));
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw ParseError(path.string() + ": trailing bytes after the last record");
    return set;
}

inline void write_snapshots_csv(const SnapshotSet& set, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "# dloc-snapshots v1 antennas=";
    for (std::size_t m = 0; m < set.antennas.size(); ++m)
        out << (m ? ";" : "") << set.antennas[m];
    out << "\nrecord,snr_db,true_x,true_y";
    for (std::size_t m = 0; m < set.antennas.size(); ++m)
        for (int n = 0; n < set.antennas[m]; ++n)
            out << ",s" << m + 1 << "_n" << n << "_re,s" << m + 1 << "_n" << n << "_im";
    out << '\n';
    for (std::size_t r = 0; r < set.records.size(); ++r) {
        const auto& rec = set.records[r];
        out << r << ',' << rec.signal.snr_db << ',' << rec.true_position.x << ',' << rec.true_position.y;
        for (Index i = 0; i < rec.signal.y.size(); ++i)
            out << ',' << rec.signal.y[i].real() << ',' << rec.signal.y[i].imag();
        out << '\n';
    }
}

inline SnapshotSet read_snapshots_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    std::string line;
    const std::string tag = "# dloc-snapshots v1 antennas=";
    if (!std::getline(in, line) || line.rfind(tag, 0) != 0)
        throw ParseError(path.string() + ": missing snapshot CSV header");
    SnapshotSet set;
    {
        std::istringstream ls(line.substr(tag.size()));
        std::string tok;
        while (std::getline(ls, tok, ';')) {
            try {
                set.antennas.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw ParseError(path.string() + ": bad antenna list");
            }
            if (set.antennas.back() < 1)
                throw ParseError(path.string() + ": bad antenna count");
        }
    }
    if (set.antennas.empty())
        throw ParseError(path.string() + ": empty antenna list");
    if (!std::getline(in, line))
        throw ParseError(path.string() + ": missing column header");
    const auto offsets = detail::offsets_for(set.antennas);
    const std::size_t expected = 4 + 2 * std::size_t(offsets.back());
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<double> vals;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(tok, &used));
                if (used != tok.size())
                    throw ParseError("");
            } catch (const std::exception&) {
                throw ParseError(path.string() + ": bad number '" + tok + "'");
            }
        }
        if (vals.size() != expected)
            throw ParseError(path.string() + ": row has " + std::to_string(vals.size()) + " fields, expected "
                             + std::to_string(expected));
        SnapshotRecord rec;
        rec.signal.offsets = offsets;
        rec.signal.snr_db = vals[1];
        rec.true_position = {vals[2], vals[3]};
        rec.signal.y.resize(offsets.back());
        for (Index i = 0; i < offsets.back(); ++i)
            rec.signal.y[i] = {vals[4 + 2 * std::size_t(i)], vals[5 + 2 * std::size_t(i)]};
        set.records.push_back(std::move(rec));
    }
    return set;
}

/// Dispatches on the file contents (binary magic) rather than the extension.
inline SnapshotSet read_snapshots(const std::filesystem::path& path)
{
    std::ifstream probe(path, std::ios::binary);
    if (!probe)
        throw ConfigError("cannot open " + path.string());
    char magic[8] = {};
    probe.read(magic, sizeof magic);
    if (probe.gcount() == sizeof magic && std::memcmp(magic, snapshot_magic, sizeof magic) == 0)
        return read_snapshots_binary(path);
    return read_snapshots_csv(path);
}

} // namespace dloc
