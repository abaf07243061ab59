#include "aac/activation_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include <json.hpp>

#include "aac/rng.hpp"

namespace aac {

using nlohmann::json;

const char* to_string(Pooling pooling) {
    return pooling == Pooling::last_token ? "last_token" : "mean";
}

const char* to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::cancel: return "cancel";
    case Split::eval: return "eval";
    }
    return "?";
}

std::span<const float> ActivationDataset::vector(std::size_t sample, std::size_t layer, Pooling pooling) const {
    const auto& rec = samples.at(sample);
    const auto& block = pooling == Pooling::last_token ? rec.last_token : rec.mean_pool;
    if (layer >= layer_count) {
        fail(ErrorKind::data, "layer_out_of_range",
             "layer " + std::to_string(layer) + " >= layer_count " + std::to_string(layer_count));
    }
    return std::span<const float>(block).subspan(layer * hidden_dim, hidden_dim);
}

std::vector<int> ActivationDataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(s.label);
    }
    return out;
}

void ActivationDataset::validate() const {
    if (layer_count == 0 || hidden_dim == 0) {
        fail(ErrorKind::data, "inconsistent_dimensions", "layer_count and hidden_dim must be positive");
    }
    if (samples.empty()) {
        fail(ErrorKind::data, "empty_dataset", "dataset has no samples");
    }
    const std::size_t block = layer_count * hidden_dim;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.last_token.size() != block || s.mean_pool.size() != block) {
            fail(ErrorKind::data, "inconsistent_dimensions",
                 "sample " + std::to_string(i) + " has " + std::to_string(s.last_token.size()) + "/" +
                     std::to_string(s.mean_pool.size()) + " values, expected " + std::to_string(block));
        }
        if (s.label != 0 && s.label != 1) {
            fail(ErrorKind::data, "bad_label", "sample " + std::to_string(i) + " label is not 0/1");
        }
        if (!ids.insert(s.prompt_id).second) {
            fail(ErrorKind::data, "duplicate_prompt_id", "duplicate prompt_id '" + s.prompt_id + "'");
        }
        for (const auto* blk : {&s.last_token, &s.mean_pool}) {
            for (std::size_t k = 0; k < blk->size(); ++k) {
                if (!std::isfinite((*blk)[k])) {
                    fail(ErrorKind::data, "non_finite",
                         "sample " + std::to_string(i) + " layer " + std::to_string(k / hidden_dim) +
                             " has a non-finite value");
                }
            }
        }
    }
}

namespace {

std::size_t last_real_position(std::span<const std::uint8_t> mask, std::size_t rows) {
    if (mask.size() != rows) {
        fail(ErrorKind::data, "shape_mismatch", "attention mask length does not match sequence length");
    }
    for (std::size_t t = rows; t-- > 0;) {
        if (mask[t] != 0) {
            return t;
        }
    }
    fail(ErrorKind::data, "empty_sequence", "sequence has no non-padding positions");
}

} // namespace

std::vector<float> pool_last_token(const MatrixF& hidden, std::span<const std::uint8_t> attention_mask) {
    const std::size_t t = last_real_position(attention_mask, hidden.rows());
    const auto row = hidden.row(t);
    return {row.begin(), row.end()};
}

std::vector<float> pool_mean(const MatrixF& hidden, std::span<const std::uint8_t> attention_mask) {
    last_real_position(attention_mask, hidden.rows());
    std::vector<double> acc(hidden.cols(), 0.0);
    std::size_t count = 0;
    for (std::size_t t = 0; t < hidden.rows(); ++t) {
        if (attention_mask[t] == 0) {
            continue;
        }
        ++count;
        const auto row = hidden.row(t);
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc[j] += row[j];
        }
    }
    std::vector<float> out(hidden.cols());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = static_cast<float>(acc[j] / static_cast<double>(count));
    }
    return out;
}

std::vector<std::size_t> SplitAssignment::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < of_sample.size(); ++i) {
        if (of_sample[i] == split) {
            out.push_back(i);
        }
    }
    return out;
}

std::size_t SplitAssignment::count(Split split) const {
    return static_cast<std::size_t>(std::count(of_sample.begin(), of_sample.end(), split));
}

SplitAssignment assign_splits(std::span<const int> labels, std::span<const std::string> ids, std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (ids.size() != n) {
        fail(ErrorKind::data, "inconsistent_dimensions", "label and id counts differ");
    }
    if (n < 8) {
        fail(ErrorKind::data, "too_few_samples", "need at least 8 samples to split, got " + std::to_string(n));
    }
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            fail(ErrorKind::data, "bad_label", "label is not 0/1");
        }
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    if (by_class[0].empty() || by_class[1].empty()) {
        fail(ErrorKind::data, "stratification", "cannot stratify: dataset contains a single class");
    }
    for (auto& members : by_class) {
        std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
        keyed.reserve(members.size());
        for (auto i : members) {
            keyed.emplace_back(keyed_hash(seed, ids[i]), i);
        }
        std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) {
                return a.first < b.first;
            }
            return ids[a.second] < ids[b.second];
        });
        for (std::size_t r = 0; r < keyed.size(); ++r) {
            members[r] = keyed[r].second;
        }
    }

    // Merge by fractional rank (2r+1)/(2 n_c); ties go to class 0.
    const std::size_t n0 = by_class[0].size();
    const std::size_t n1 = by_class[1].size();
    std::vector<std::size_t> order;
    order.reserve(n);
    std::size_t r0 = 0, r1 = 0;
    while (r0 < n0 || r1 < n1) {
        bool take0;
        if (r0 == n0) {
            take0 = false;
        } else if (r1 == n1) {
            take0 = true;
        } else {
            take0 = (2 * r0 + 1) * n1 <= (2 * r1 + 1) * n0;
        }
        order.push_back(take0 ? by_class[0][r0++] : by_class[1][r1++]);
    }

    const std::size_t n_train = n / 2;
    const std::size_t n_cancel = n / 4;
    SplitAssignment out;
    out.of_sample.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const Split s = pos < n_train ? Split::train : (pos < n_train + n_cancel ? Split::cancel : Split::eval);
        out.of_sample[order[pos]] = s;
    }
    return out;
}

SplitAssignment assign_splits(const ActivationDataset& dataset) {
    std::vector<std::string> ids;
    ids.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        ids.push_back(s.prompt_id);
    }
    const auto labels = dataset.labels();
    return assign_splits(labels, ids, dataset.split_seed);
}

MatrixD gather_features(const ActivationDataset& dataset, std::span<const std::size_t> samples,
                        std::size_t layer, Pooling pooling) {
    MatrixD out(samples.size(), dataset.hidden_dim);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        const auto v = dataset.vector(samples[r], layer, pooling);
        std::copy(v.begin(), v.end(), out.row(r).begin());
    }
    return out;
}

std::vector<int> gather_labels(const ActivationDataset& dataset, std::span<const std::size_t> samples) {
    std::vector<int> out;
    out.reserve(samples.size());
    for (auto i : samples) {
        out.push_back(dataset.samples.at(i).label);
    }
    return out;
}

// ---- container ----

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'A', 'A', 'C', 'T'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    auto bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        out.push_back(static_cast<std::uint8_t>(bits & 0xffu));
        bits >>= 8;
    }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = sizeof(T); b-- > 0;) {
        bits = (bits << 8) | in[offset + b];
    }
    return std::bit_cast<T>(bits);
}

} // namespace

std::vector<std::uint8_t> encode_container(const ActivationDataset& dataset) {
    dataset.validate();
    json meta;
    meta["model_id"] = dataset.model_id;
    meta["layer_count"] = dataset.layer_count;
    meta["hidden_dim"] = dataset.hidden_dim;
    meta["sample_count"] = dataset.samples.size();
    meta["split_seed"] = dataset.split_seed;
    meta["pooling"] = json::array({"last_token", "mean"});
    json labels = json::array(), ids = json::array(), excerpts = json::array();
    for (const auto& s : dataset.samples) {
        labels.push_back(s.label);
        ids.push_back(s.prompt_id);
        excerpts.push_back(s.prompt_excerpt);
    }
    meta["labels"] = std::move(labels);
    meta["prompt_ids"] = std::move(ids);
    meta["prompt_excerpts"] = std::move(excerpts);
    const std::string text = meta.dump(-1, ' ', false, json::error_handler_t::replace);

    const std::size_t d = dataset.hidden_dim;
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + text.size() + dataset.samples.size() * dataset.layer_count * 2 * d * 4);
    for (auto b : kMagic) {
        out.push_back(b);
    }
    put_le<std::uint32_t>(out, kContainerVersion);
    put_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& s : dataset.samples) {
        for (std::size_t l = 0; l < dataset.layer_count; ++l) {
            for (const auto* blk : {&s.last_token, &s.mean_pool}) {
                for (std::size_t j = 0; j < d; ++j) {
                    put_le<float>(out, (*blk)[l * d + j]);
                }
            }
        }
    }
    return out;
}

ActivationDataset decode_container(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        fail(ErrorKind::data, "bad_magic", "not an AACT container (bad magic bytes)");
    }
    if (bytes.size() < kHeaderBytes) {
        fail(ErrorKind::data, "truncated",
             "container truncated: expected at least " + std::to_string(kHeaderBytes) + " bytes, got " +
                 std::to_string(bytes.size()));
    }
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kContainerVersion) {
        fail(ErrorKind::data, "version_mismatch",
             "unsupported container version " + std::to_string(version) + " (supported: " +
                 std::to_string(kContainerVersion) + ")");
    }
    const auto meta_len = get_le<std::uint64_t>(bytes, 8);
    if (meta_len > bytes.size() - kHeaderBytes) {
        fail(ErrorKind::data, "truncated",
             "container truncated: expected at least " + std::to_string(kHeaderBytes + meta_len) +
                 " bytes, got " + std::to_string(bytes.size()));
    }
    json meta;
    try {
        meta = json::parse(bytes.begin() + kHeaderBytes, bytes.begin() + static_cast<long>(kHeaderBytes + meta_len));
    } catch (const json::exception& e) {
        fail(ErrorKind::data, "bad_metadata", std::string("container metadata is not valid JSON: ") + e.what());
    }

    ActivationDataset ds;
    std::vector<int> labels;
    std::vector<std::string> ids, excerpts;
    std::size_t sample_count = 0;
    try {
        ds.model_id = meta.at("model_id").get<std::string>();
        ds.layer_count = meta.at("layer_count").get<std::size_t>();
        ds.hidden_dim = meta.at("hidden_dim").get<std::size_t>();
        ds.split_seed = meta.at("split_seed").get<std::uint64_t>();
        sample_count = meta.at("sample_count").get<std::size_t>();
        labels = meta.at("labels").get<std::vector<int>>();
        ids = meta.at("prompt_ids").get<std::vector<std::string>>();
        excerpts = meta.at("prompt_excerpts").get<std::vector<std::string>>();
        const auto pooling = meta.at("pooling").get<std::vector<std::string>>();
        if (pooling != std::vector<std::string>{"last_token", "mean"}) {
            fail(ErrorKind::data, "bad_metadata", "container must hold last_token and mean pooling blocks, in that order");
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::data, "bad_metadata", std::string("container metadata missing or mistyped field: ") + e.what());
    }
    if (labels.size() != sample_count || ids.size() != sample_count || excerpts.size() != sample_count) {
        fail(ErrorKind::data, "inconsistent_dimensions",
             "metadata lists " + std::to_string(labels.size()) + " labels, " + std::to_string(ids.size()) +
                 " prompt ids and " + std::to_string(excerpts.size()) + " excerpts for sample_count " +
                 std::to_string(sample_count));
    }
    if (ds.layer_count == 0 || ds.hidden_dim == 0) {
        fail(ErrorKind::data, "inconsistent_dimensions", "layer_count and hidden_dim must be positive");
    }

    const std::size_t block = ds.layer_count * ds.hidden_dim;
    const std::size_t payload_offset = kHeaderBytes + meta_len;
    const std::size_t expected = payload_offset + sample_count * block * 2 * sizeof(float);
    if (bytes.size() != expected) {
        fail(ErrorKind::data, bytes.size() < expected ? "truncated" : "trailing_bytes",
             "container size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                 std::to_string(bytes.size()));
    }

    ds.samples.resize(sample_count);
    std::size_t offset = payload_offset;
    const std::size_t d = ds.hidden_dim;
    for (std::size_t i = 0; i < sample_count; ++i) {
        auto& rec = ds.samples[i];
        rec.prompt_id = ids[i];
        rec.label = labels[i];
        rec.prompt_excerpt = excerpts[i];
        rec.last_token.resize(block);
        rec.mean_pool.resize(block);
        for (std::size_t l = 0; l < ds.layer_count; ++l) {
            for (auto* blk : {&rec.last_token, &rec.mean_pool}) {
                for (std::size_t j = 0; j < d; ++j) {
                    (*blk)[l * d + j] = get_le<float>(bytes, offset);
                    offset += sizeof(float);
                }
            }
        }
    }
    ds.validate();
    return ds;
}

void write_container(const ActivationDataset& dataset, const std::filesystem::path& path) {
    const auto bytes = encode_container(dataset);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::data, "io", "cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorKind::data, "io", "failed writing '" + path.string() + "'");
    }
}

ActivationDataset read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::data, "io", "cannot open '" + path.string() + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_container(bytes);
}

} // namespace aac
