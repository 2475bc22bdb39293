#pragma once

#include "forgeseek/cooccurrence.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forgeseek {

enum class Label { Pristine, Fake };

std::string_view label_name(Label label) noexcept;
std::optional<Label> parse_label(std::string_view text) noexcept;

/// One image's features over a LabeledSet-ready (possibly merged) vector.
struct LabeledItem {
    std::string image_id;
    Label label;
    std::vector<double> features;
};

struct LabeledSet {
    std::vector<ModelId> selection;
    std::vector<LabeledItem> items;

    std::size_t count(Label label) const noexcept;
    std::size_t dim() const noexcept { return items.empty() ? 0 : items.front().features.size(); }
};

struct FeatureRow {
    std::string image_id;
    Label label;
    std::vector<FeatureVector> blocks;  // one per table model, in table order
};

/// Per-model feature blocks for a set of images; the unit of the feature CSV.
struct FeatureTable {
    std::vector<ModelId> models;
    std::vector<FeatureRow> rows;

    /// Merged view of the selected models, in selection order.
    LabeledSet labeled(std::span<const ModelId> selection) const;
};

/// CSV with header `image_id,label,f0,f1,...`; columns follow `models` order,
/// each block in orbit-representative order. Values are written with 17
/// significant digits.
void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path);

/// The column layout is not self-describing: `models` names the blocks the
/// file was written with and must match its column count.
FeatureTable read_feature_csv(const std::filesystem::path& path, std::span<const ModelId> models);

}  // namespace forgeseek
