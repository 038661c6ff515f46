#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "maniloc/types.hpp"

namespace maniloc {

/// Single-file container for named float32 tensors plus a free-form JSON
/// metadata object. Layout: magic, version, JSON header (tensor table +
/// metadata), 64-byte aligned blob. Used for backbone weights, trained
/// decoder checkpoints and cached feature grids.
class TensorArchive {
public:
    struct Entry {
        std::vector<std::int64_t> shape;
        std::int64_t offset = 0;  // floats, relative to blob start
        std::int64_t size = 0;    // element count
    };

    static TensorArchive load(const std::string& path);

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    const Entry& entry(const std::string& name) const;
    std::vector<std::string> names() const;

    /// Flat view over a stored tensor.
    std::span<const float> tensor(const std::string& name) const;

    /// Copy into a dense matrix; the stored row-major [rows, cols] layout is
    /// converted to Eigen's default column-major storage.
    MatF matrix(const std::string& name, std::int64_t rows, std::int64_t cols) const;
    VecF vector(const std::string& name, std::int64_t size) const;

    const nlohmann::json& meta() const;

    /// Digest over tensor contents in name-sorted order (metadata excluded).
    std::uint64_t content_digest() const;

private:
    std::map<std::string, Entry> entries_;
    std::vector<float> blob_;
    std::shared_ptr<nlohmann::json> meta_;
};

/// Read only the JSON metadata of an archive (cheap even for GB files).
nlohmann::json peek_archive_meta(const std::string& path);

/// Streams tensors into memory, then writes the archive atomically
/// (temp file + rename).
class TensorArchiveWriter {
public:
    void add(const std::string& name, std::vector<std::int64_t> shape, std::span<const float> data);
    void add_matrix(const std::string& name, const MatF& m);  // stored row-major [rows, cols]
    void add_vector(const std::string& name, const VecF& v);
    void set_meta(const nlohmann::json& meta);

    void write(const std::string& path) const;

private:
    struct Pending {
        std::string name;
        std::vector<std::int64_t> shape;
        std::vector<float> data;
    };
    std::vector<Pending> tensors_;
    std::shared_ptr<nlohmann::json> meta_;
};

}  // namespace maniloc
