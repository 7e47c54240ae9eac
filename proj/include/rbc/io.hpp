#pragma once

// Flat-file artifacts: binary field snapshots, CSV time series, JSON
// summaries, and bit-exact restart checkpoints.  All binary formats are
// little-endian; every text output embeds the config hash and code version.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rbc/grid.hpp"
#include "rbc/params.hpp"
#include "rbc/version.hpp"

namespace rbc {

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t config_hash(const ExperimentConfig& cfg); // over the canonical text
std::string hex64(std::uint64_t v);

// Binary field snapshot: header {magic "BFLD", version u32, nx u32, nz u32,
// aspect f64, time f64}, then nx*nz f64 values with the z index contiguous.
void write_snapshot(const std::string& path, const Grid& g, const Field& f, double time);

struct SnapshotData {
    int nx = 0, nz = 0;
    double aspect = 0.0;
    double time = 0.0;
    std::vector<double> values;
};
SnapshotData read_snapshot(const std::string& path);

// CSV of the horizontal mean profile: columns z, mean.
void write_profile_csv(const std::string& path, const Grid& g, const Field& f,
                       std::uint64_t cfg_hash);

// Numeric CSV writer; opens with "# version=..." / "# config_hash=..."
// comments unless appending to an existing file.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns,
              std::uint64_t cfg_hash, bool append = false);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<double>& values);
    void flush();
    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::size_t arity_;
    void* file_; // std::FILE, kept out of the header
};

std::string format_double(double v); // %.17g, round-trip exact

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

// Restart checkpoint.  Layout: magic "BCKP", format version u32, code version
// (u32 length + bytes), config hash u64, model u8 (0 finite, 1 infinite),
// base_seed u64, trajectory_id u64, step u64, t f64, has_history u8,
// nx u32, nz u32, aspect f64, field count u32, then that many nx*nz f64
// blocks.  Finite model stores theta, omega and the two saved explicit
// tendencies; infinite stores theta and its saved tendency.  The RNG needs no
// stored state: streams are counter-based, so (seed ids, step) is the whole
// position.
struct CheckpointData {
    std::uint32_t format_version = kCheckpointFormatVersion;
    std::string code_version;
    std::uint64_t cfg_hash = 0;
    std::uint8_t model = 0;
    std::uint64_t base_seed = 0;
    std::uint64_t trajectory_id = 0;
    std::uint64_t step = 0;
    double t = 0.0;
    bool has_history = false;
    int nx = 0, nz = 0;
    double aspect = 0.0;
    std::vector<std::vector<double>> fields;
};

// Writes to a temporary file then renames, so an interrupted write never
// clobbers the previous checkpoint.
void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

std::uint64_t file_checksum(const std::string& path);

} // namespace rbc
