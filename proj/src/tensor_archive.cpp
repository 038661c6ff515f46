#include "maniloc/tensor_archive.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"

namespace maniloc {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::int64_t kAlign = 16;  // floats

std::int64_t shape_size(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

}  // namespace

TensorArchive TensorArchive::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("cannot open tensor archive: " + path);
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t json_len = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
    if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion)
        throw RuntimeFailure("not a tensor archive: " + path);
    std::string header(json_len, '\0');
    in.read(header.data(), std::streamsize(json_len));
    nlohmann::json doc = nlohmann::json::parse(header, nullptr, false);
    if (doc.is_discarded()) throw RuntimeFailure("corrupt archive header: " + path);

    TensorArchive archive;
    archive.meta_ = std::make_shared<nlohmann::json>(doc.value("meta", nlohmann::json::object()));
    std::int64_t blob_floats = 0;
    for (const auto& t : doc.at("tensors")) {
        Entry e;
        e.shape = t.at("shape").get<std::vector<std::int64_t>>();
        e.offset = t.at("offset").get<std::int64_t>();
        e.size = shape_size(e.shape);
        blob_floats = std::max(blob_floats, e.offset + e.size);
        archive.entries_[t.at("name").get<std::string>()] = std::move(e);
    }
    // blob begins at the next 64-byte boundary after the header
    const std::uint64_t header_end = 16 + json_len;
    const std::uint64_t blob_start = (header_end + 63) / 64 * 64;
    in.seekg(std::streamoff(blob_start));
    archive.blob_.resize(std::size_t(blob_floats));
    in.read(reinterpret_cast<char*>(archive.blob_.data()),
            std::streamsize(blob_floats * std::int64_t(sizeof(float))));
    if (!in) throw RuntimeFailure("truncated tensor archive: " + path);
    return archive;
}

nlohmann::json peek_archive_meta(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("cannot open tensor archive: " + path);
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t json_len = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
    if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion)
        throw RuntimeFailure("not a tensor archive: " + path);
    std::string header(json_len, '\0');
    in.read(header.data(), std::streamsize(json_len));
    nlohmann::json doc = nlohmann::json::parse(header, nullptr, false);
    if (doc.is_discarded()) throw RuntimeFailure("corrupt archive header: " + path);
    return doc.value("meta", nlohmann::json::object());
}

const TensorArchive::Entry& TensorArchive::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw RuntimeFailure("archive tensor missing: " + name);
    return it->second;
}

std::vector<std::string> TensorArchive::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

std::span<const float> TensorArchive::tensor(const std::string& name) const {
    const Entry& e = entry(name);
    return {blob_.data() + e.offset, std::size_t(e.size)};
}

MatF TensorArchive::matrix(const std::string& name, std::int64_t rows, std::int64_t cols) const {
    auto view = tensor(name);
    if (std::int64_t(view.size()) != rows * cols)
        throw RuntimeFailure("archive tensor size mismatch: " + name);
    return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        view.data(), rows, cols);
}

VecF TensorArchive::vector(const std::string& name, std::int64_t size) const {
    auto view = tensor(name);
    if (std::int64_t(view.size()) != size)
        throw RuntimeFailure("archive tensor size mismatch: " + name);
    return Eigen::Map<const VecF>(view.data(), size);
}

const nlohmann::json& TensorArchive::meta() const { return *meta_; }

std::uint64_t TensorArchive::content_digest() const {
    Fnv64 digest;
    for (const auto& [name, e] : entries_) {  // std::map: name-sorted
        digest.update(name);
        digest.update(blob_.data() + e.offset, std::size_t(e.size) * sizeof(float));
    }
    return digest.digest();
}

void TensorArchiveWriter::add(const std::string& name, std::vector<std::int64_t> shape,
                              std::span<const float> data) {
    if (shape_size(shape) != std::int64_t(data.size()))
        throw RuntimeFailure("tensor shape/data mismatch: " + name);
    tensors_.push_back({name, std::move(shape), {data.begin(), data.end()}});
}

void TensorArchiveWriter::add_matrix(const std::string& name, const MatF& m) {
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = m;
    add(name, {m.rows(), m.cols()}, {row_major.data(), std::size_t(row_major.size())});
}

void TensorArchiveWriter::add_vector(const std::string& name, const VecF& v) {
    add(name, {v.size()}, {v.data(), std::size_t(v.size())});
}

void TensorArchiveWriter::set_meta(const nlohmann::json& meta) {
    meta_ = std::make_shared<nlohmann::json>(meta);
}

void TensorArchiveWriter::write(const std::string& path) const {
    nlohmann::json header;
    header["meta"] = meta_ ? *meta_ : nlohmann::json::object();
    header["tensors"] = nlohmann::json::array();
    std::int64_t offset = 0;
    for (const auto& t : tensors_) {
        header["tensors"].push_back(
            {{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"dtype", "f32"}});
        offset += std::int64_t(t.data.size());
        offset = (offset + kAlign - 1) / kAlign * kAlign;
    }
    const std::string json_text = header.dump();

    const std::filesystem::path final_path(path);
    if (final_path.has_parent_path()) std::filesystem::create_directories(final_path.parent_path());
    const std::filesystem::path tmp_path =
        final_path.parent_path() / (final_path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeFailure("cannot write tensor archive: " + path);
        out.write(kMagic, 4);
        out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
        const std::uint64_t json_len = json_text.size();
        out.write(reinterpret_cast<const char*>(&json_len), sizeof(json_len));
        out.write(json_text.data(), std::streamsize(json_len));
        const std::uint64_t header_end = 16 + json_len;
        const std::uint64_t blob_start = (header_end + 63) / 64 * 64;
        const std::string pad(blob_start - header_end, '\0');
        out.write(pad.data(), std::streamsize(pad.size()));
        std::int64_t written = 0;
        for (const auto& t : tensors_) {
            out.write(reinterpret_cast<const char*>(t.data.data()),
                      std::streamsize(t.data.size() * sizeof(float)));
            written += std::int64_t(t.data.size());
            const std::int64_t aligned = (written + kAlign - 1) / kAlign * kAlign;
            const std::string gap((aligned - written) * sizeof(float), '\0');
            out.write(gap.data(), std::streamsize(gap.size()));
            written = aligned;
        }
        if (!out) throw RuntimeFailure("write failed: " + path);
    }
    std::filesystem::rename(tmp_path, final_path);
}

}  // namespace maniloc
