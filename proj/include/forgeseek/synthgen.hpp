#pragma once

#include "forgeseek/feature_table.hpp"
#include "forgeseek/image.hpp"
#include "forgeseek/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace forgeseek {

struct CorpusSpec {
    int n_pristine = 0;
    int n_copymove = 0;
    int n_splice = 0;
    int image_size = 256;
    int block_min = 48;
    int block_max = 96;
    double rotation_prob = 0.0;
    int max_rotation = 45;  // rotated copies use multiples of 15 up to this
    int source_quality = 95;  // 0 disables JPEG on the host
    int paste_quality = 50;   // 0 disables JPEG on the splice donor
    int min_offset = 8;
    std::uint64_t seed = 1;

    void validate() const;
};

CorpusSpec corpus_spec_from_json(const std::string& text);
CorpusSpec load_corpus_spec(const std::filesystem::path& path);

enum class ItemKind { Pristine, CopyMove, Splice };

std::string_view kind_name(ItemKind kind) noexcept;

struct CorpusItem {
    std::string id;
    ItemKind kind = ItemKind::Pristine;
    GrayImage base;   // the pristine image the item was derived from
    GrayImage image;  // what gets written to disk
    BinaryMask mask;
    int block = 0;
    int rotation = 0;  // degrees, copy-move only
    std::string params;

    Label label() const noexcept { return kind == ItemKind::Pristine ? Label::Pristine : Label::Fake; }
};

/// Smoothed random texture: sum of Gaussian-filtered noise octaves around a
/// random mean level, integer valued.
GrayImage synth_texture(int width, int height, Rng& rng);

/// Item `index` of the corpus (pristine items first, then copy-moves, then
/// splices). Depends only on (spec, index).
CorpusItem generate_item(const CorpusSpec& spec, std::size_t index);

struct ManifestEntry {
    std::string id;
    Label label;
    ItemKind kind;
    std::string params;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Writes `out_dir/{pristine,fake}/<id>.png`, `out_dir/masks/<id>.png` and
/// `out_dir/manifest.csv`. Returns the manifest rows.
std::vector<ManifestEntry> generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                                           int threads = 1);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

}  // namespace forgeseek
