#include "rbc/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace rbc {

namespace {

void put_bytes(std::string& buf, const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

void put_u32(std::string& buf, std::uint32_t v) { put_bytes(buf, &v, 4); }
void put_u64(std::string& buf, std::uint64_t v) { put_bytes(buf, &v, 8); }
void put_f64(std::string& buf, double v) { put_bytes(buf, &v, 8); }

class ByteReader {
  public:
    ByteReader(const std::string& bytes, std::string what)
        : bytes_(bytes), what_(std::move(what)) {}

    void raw(void* p, std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw std::runtime_error(what_ + ": truncated file");
        std::memcpy(p, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
    bool exhausted() const { return pos_ == bytes_.size(); }

  private:
    const std::string& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::string slurp(const std::string& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(what + ": cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void spew(const std::string& path, const std::string& bytes, const std::string& what) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(what + ": cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error(what + ": short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string text = cfg.canonical();
    return fnv1a64(text.data(), text.size());
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_snapshot(const std::string& path, const Grid& g, const Field& f, double time) {
    check_shape(g, f, "snapshot field");
    std::string buf;
    buf.reserve(28 + f.size() * 8);
    put_bytes(buf, "BFLD", 4);
    put_u32(buf, kSnapshotFormatVersion);
    put_u32(buf, static_cast<std::uint32_t>(g.nx));
    put_u32(buf, static_cast<std::uint32_t>(g.nz));
    put_f64(buf, g.aspect);
    put_f64(buf, time);
    put_bytes(buf, f.data(), f.size() * sizeof(double));
    spew(path, buf, "snapshot");
}

SnapshotData read_snapshot(const std::string& path) {
    const std::string bytes = slurp(path, "snapshot");
    ByteReader r(bytes, "snapshot");
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, "BFLD", 4) != 0)
        throw std::runtime_error("snapshot: bad magic in " + path);
    const std::uint32_t ver = r.u32();
    if (ver != kSnapshotFormatVersion)
        throw std::runtime_error("snapshot: format version " + std::to_string(ver) +
                                 ", this build reads " + std::to_string(kSnapshotFormatVersion));
    SnapshotData s;
    s.nx = static_cast<int>(r.u32());
    s.nz = static_cast<int>(r.u32());
    if (s.nx <= 0 || s.nz <= 0 || s.nx > (1 << 20) || s.nz > (1 << 20))
        throw std::runtime_error("snapshot: implausible dimensions in " + path);
    s.aspect = r.f64();
    s.time = r.f64();
    const std::size_t count = static_cast<std::size_t>(s.nx) * static_cast<std::size_t>(s.nz);
    s.values.resize(count);
    r.raw(s.values.data(), count * sizeof(double));
    if (!r.exhausted())
        throw std::runtime_error("snapshot: trailing bytes in " + path);
    return s;
}

void write_profile_csv(const std::string& path, const Grid& g, const Field& f,
                       std::uint64_t cfg_hash) {
    check_shape(g, f, "profile field");
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("profile: cannot open " + path + " for writing");
    std::fprintf(fp, "# version=%s\n# config_hash=%s\nz,mean\n", kCodeVersion,
                 hex64(cfg_hash).c_str());
    for (int j = 0; j < g.nz; ++j) {
        double m = 0.0;
        for (int i = 0; i < g.nx; ++i) m += f(i, j);
        m /= g.nx;
        std::fprintf(fp, "%s,%s\n", format_double(g.z(j)).c_str(), format_double(m).c_str());
    }
    std::fclose(fp);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns,
                     std::uint64_t cfg_hash, bool append)
    : path_(path), arity_(columns.size()) {
    if (columns.empty()) throw std::invalid_argument("CSV needs at least one column");
    std::FILE* fp = std::fopen(path.c_str(), append ? "a" : "w");
    if (!fp) throw std::runtime_error("csv: cannot open " + path + " for writing");
    file_ = fp;
    if (!append) {
        std::fprintf(fp, "# version=%s\n# config_hash=%s\n", kCodeVersion,
                     hex64(cfg_hash).c_str());
        for (std::size_t i = 0; i < columns.size(); ++i)
            std::fprintf(fp, "%s%s", columns[i].c_str(), i + 1 < columns.size() ? "," : "\n");
    }
}

CsvWriter::~CsvWriter() {
    if (file_) std::fclose(static_cast<std::FILE*>(file_));
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != arity_)
        throw std::invalid_argument("csv row arity mismatch in " + path_);
    auto* fp = static_cast<std::FILE*>(file_);
    for (std::size_t i = 0; i < values.size(); ++i)
        std::fprintf(fp, "%s%s", format_double(values[i]).c_str(),
                     i + 1 < values.size() ? "," : "\n");
}

void CsvWriter::flush() { std::fflush(static_cast<std::FILE*>(file_)); }

void write_json(const std::string& path, const nlohmann::json& j) {
    spew(path, j.dump(2) + "\n", "json");
}

nlohmann::json read_json(const std::string& path) {
    const std::string bytes = slurp(path, "json");
    return nlohmann::json::parse(bytes);
}

void write_checkpoint(const std::string& path, const CheckpointData& d) {
    std::string buf;
    put_bytes(buf, "BCKP", 4);
    put_u32(buf, d.format_version);
    put_u32(buf, static_cast<std::uint32_t>(d.code_version.size()));
    put_bytes(buf, d.code_version.data(), d.code_version.size());
    put_u64(buf, d.cfg_hash);
    buf.push_back(static_cast<char>(d.model));
    put_u64(buf, d.base_seed);
    put_u64(buf, d.trajectory_id);
    put_u64(buf, d.step);
    put_f64(buf, d.t);
    buf.push_back(d.has_history ? 1 : 0);
    put_u32(buf, static_cast<std::uint32_t>(d.nx));
    put_u32(buf, static_cast<std::uint32_t>(d.nz));
    put_f64(buf, d.aspect);
    put_u32(buf, static_cast<std::uint32_t>(d.fields.size()));
    const std::size_t count = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.nz);
    for (const auto& f : d.fields) {
        if (f.size() != count)
            throw std::invalid_argument("checkpoint field has wrong size");
        put_bytes(buf, f.data(), f.size() * sizeof(double));
    }
    spew(path, buf, "checkpoint");
}

CheckpointData read_checkpoint(const std::string& path) {
    const std::string bytes = slurp(path, "checkpoint");
    ByteReader r(bytes, "checkpoint");
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, "BCKP", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    CheckpointData d;
    d.format_version = r.u32();
    if (d.format_version != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint: format version " + std::to_string(d.format_version) +
                                 ", this build reads " + std::to_string(kCheckpointFormatVersion));
    const std::uint32_t vlen = r.u32();
    if (vlen > 64) throw std::runtime_error("checkpoint: implausible version string");
    d.code_version.resize(vlen);
    r.raw(d.code_version.data(), vlen);
    d.cfg_hash = r.u64();
    d.model = r.u8();
    d.base_seed = r.u64();
    d.trajectory_id = r.u64();
    d.step = r.u64();
    d.t = r.f64();
    d.has_history = r.u8() != 0;
    d.nx = static_cast<int>(r.u32());
    d.nz = static_cast<int>(r.u32());
    if (d.nx <= 0 || d.nz <= 0 || d.nx > (1 << 20) || d.nz > (1 << 20))
        throw std::runtime_error("checkpoint: implausible dimensions in " + path);
    d.aspect = r.f64();
    const std::uint32_t nf = r.u32();
    if (nf > 8) throw std::runtime_error("checkpoint: implausible field count in " + path);
    const std::size_t count = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.nz);
    d.fields.assign(nf, std::vector<double>(count));
    for (auto& f : d.fields) r.raw(f.data(), count * sizeof(double));
    if (!r.exhausted())
        throw std::runtime_error("checkpoint: trailing bytes in " + path);
    return d;
}

std::uint64_t file_checksum(const std::string& path) {
    const std::string bytes = slurp(path, "checksum");
    return fnv1a64(bytes.data(), bytes.size());
}

} // namespace rbc
