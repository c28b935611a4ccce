#pragma once

// Dataset provision: synthetic class-conditional blobs, CIFAR-10 binary
// ingestion, label-skew partitioning with a persisted partition file, and
// generator-driven augmentation.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blazefl/codec.hpp"
#include "blazefl/rng.hpp"
#include "blazefl/tensor.hpp"

namespace blazefl::data {

class DataFormatError : public codec::FormatError {
 public:
  using codec::FormatError::FormatError;
};

// Partition-file errors are distinct so callers can tell a corrupted file
// from an incompatible or malformed one.
class PartitionParseError : public codec::FormatError {
 public:
  using codec::FormatError::FormatError;
};
class PartitionVersionError : public codec::FormatError {
 public:
  using codec::FormatError::FormatError;
};
class PartitionChecksumError : public codec::FormatError {
 public:
  using codec::FormatError::FormatError;
};

struct Dataset {
  Tensor images;                    // [N,C,H,W], values in [0,1]
  std::vector<std::int64_t> labels; // one per sample, in [0,n_classes)
  std::int64_t n_classes = 0;

  std::int64_t size() const { return images.shape().empty() ? 0 : images.shape()[0]; }
};

inline Dataset subset(const Dataset& ds, std::span<const std::int64_t> indices) {
  const auto& shape = ds.images.shape();
  const std::size_t sample_elems =
      static_cast<std::size_t>(shape[1] * shape[2] * shape[3]);
  std::vector<float> out(indices.size() * sample_elems);
  std::vector<std::int64_t> labels(indices.size());
  const auto src = ds.images.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto idx = indices[i];
    if (idx < 0 || idx >= ds.size()) {
      throw std::invalid_argument("subset: sample index out of range");
    }
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(
                                  static_cast<std::size_t>(idx) * sample_elems),
                sample_elems, out.begin() + static_cast<std::ptrdiff_t>(i * sample_elems));
    labels[i] = ds.labels[static_cast<std::size_t>(idx)];
  }
  Dataset result;
  result.images = Tensor({static_cast<std::int64_t>(indices.size()), shape[1],
                          shape[2], shape[3]},
                         std::move(out));
  result.labels = std::move(labels);
  result.n_classes = ds.n_classes;
  return result;
}

// Class-conditional Gaussian blobs. Per class, a fixed mean pattern is drawn
// from a stream seeded by (seed, ServerInit, class, 0); per-sample noise
// continues on the same stream with sigma 0.25, clamped to [0,1]. Samples are
// ordered class-major, then by sample index.
inline Dataset generate_synthetic(std::int64_t n_classes, std::int64_t per_class,
                                  const std::vector<std::int64_t>& shape,
                                  std::uint64_t seed) {
  if (n_classes < 2) {
    throw std::invalid_argument("generate_synthetic: n_classes must be >= 2");
  }
  if (per_class < 1) {
    throw std::invalid_argument("generate_synthetic: per_class must be >= 1");
  }
  if (shape.size() != 3 || shape[0] <= 0 || shape[1] <= 0 || shape[2] <= 0) {
    throw std::invalid_argument("generate_synthetic: shape must be [C,H,W]");
  }
  const std::size_t dims =
      static_cast<std::size_t>(shape[0] * shape[1] * shape[2]);
  const std::int64_t total = n_classes * per_class;
  std::vector<float> images(static_cast<std::size_t>(total) * dims);
  std::vector<std::int64_t> labels(static_cast<std::size_t>(total));

  std::vector<double> mean(dims);
  for (std::int64_t k = 0; k < n_classes; ++k) {
    rng::RngStream stream(rng::derive_seed(
        seed, rng::SeedDomain::ServerInit, static_cast<std::uint64_t>(k), 0));
    for (auto& m : mean) m = rng::next_uniform(stream);
    for (std::int64_t s = 0; s < per_class; ++s) {
      const std::size_t base =
          static_cast<std::size_t>(k * per_class + s) * dims;
      for (std::size_t e = 0; e < dims; ++e) {
        const double v = mean[e] + 0.25 * rng::next_gaussian(stream);
        images[base + e] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
      labels[static_cast<std::size_t>(k * per_class + s)] = k;
    }
  }

  Dataset ds;
  ds.images = Tensor({total, shape[0], shape[1], shape[2]}, std::move(images));
  ds.labels = std::move(labels);
  ds.n_classes = n_classes;
  return ds;
}

// CIFAR-10 binary layout: per record one label byte then 3072 pixel bytes,
// channel-major R,G,B at 32x32. Loads every *.bin file in the directory in
// lexicographic filename order; record order within a file is preserved.
inline Dataset load_cifar10_binary(const std::filesystem::path& directory) {
  constexpr std::size_t kRecordBytes = 1 + 3 * 32 * 32;
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(directory)) {
    throw DataFormatError("load_cifar10_binary: not a directory: " +
                          directory.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw DataFormatError("load_cifar10_binary: no .bin files in " +
                          directory.string());
  }
  std::sort(files.begin(), files.end());

  std::vector<float> images;
  std::vector<std::int64_t> labels;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      throw DataFormatError("load_cifar10_binary: cannot open " + file.string());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    if (bytes.size() % kRecordBytes != 0) {
      const std::size_t offset = (bytes.size() / kRecordBytes) * kRecordBytes;
      std::ostringstream msg;
      msg << "load_cifar10_binary: truncated record in " << file.string()
          << " at offset " << offset;
      throw DataFormatError(msg.str());
    }
    const std::size_t records = bytes.size() / kRecordBytes;
    images.reserve(images.size() + records * 3072);
    for (std::size_t r = 0; r < records; ++r) {
      const std::size_t base = r * kRecordBytes;
      const auto label = static_cast<unsigned char>(bytes[base]);
      if (label > 9) {
        std::ostringstream msg;
        msg << "load_cifar10_binary: label byte " << static_cast<int>(label)
            << " > 9 in " << file.string() << " at offset " << base;
        throw DataFormatError(msg.str());
      }
      labels.push_back(label);
      for (std::size_t p = 0; p < 3072; ++p) {
        images.push_back(
            static_cast<float>(static_cast<unsigned char>(bytes[base + 1 + p])) /
            255.0f);
      }
    }
  }

  if (labels.empty()) {
    throw DataFormatError("load_cifar10_binary: no records under " +
                          directory.string());
  }
  Dataset ds;
  ds.images = Tensor({static_cast<std::int64_t>(labels.size()), 3, 32, 32},
                     std::move(images));
  ds.labels = std::move(labels);
  ds.n_classes = 10;
  return ds;
}

// Immutable client -> sample-index mapping with provenance seed.
struct Partition {
  std::uint64_t base_seed = 0;
  std::int64_t n_clients = 0;
  std::int64_t classes_per_client = 0;
  std::vector<std::vector<std::int64_t>> assignment;  // sorted ascending

  friend bool operator==(const Partition&, const Partition&) = default;
};

// Label-skew shard partitioner. Samples are grouped by (label, original
// index) and cut into label-pure shards of size samples_per_client /
// classes_per_client; the shard order is shuffled once from
// (seed, ClientSampling, 0, 0) and clients are dealt classes_per_client
// shards of distinct classes, always taking from the classes with the most
// shards remaining so the distinct-class guarantee never strands supply.
inline Partition partition_label_skew(const Dataset& dataset,
                                      std::int64_t n_clients,
                                      std::int64_t classes_per_client,
                                      std::int64_t samples_per_client,
                                      std::uint64_t seed) {
  const std::int64_t n = dataset.size();
  if (n_clients < 1) {
    throw std::invalid_argument("partition_label_skew: n_clients must be >= 1");
  }
  if (classes_per_client < 1 || classes_per_client > dataset.n_classes) {
    throw std::invalid_argument(
        "partition_label_skew: classes_per_client must be in [1, n_classes]");
  }
  if (samples_per_client < 1 ||
      samples_per_client % classes_per_client != 0) {
    throw std::invalid_argument(
        "partition_label_skew: samples_per_client must be a positive multiple "
        "of classes_per_client");
  }
  if (n_clients * samples_per_client > n) {
    std::ostringstream msg;
    msg << "partition_label_skew: infeasible, n_clients*samples_per_client = "
        << n_clients * samples_per_client << " exceeds dataset size " << n;
    throw std::invalid_argument(msg.str());
  }
  const std::int64_t shard_size = samples_per_client / classes_per_client;

  // Label-pure shards, class-major, ascending original index within a class.
  std::vector<std::vector<std::int64_t>> by_class(
      static_cast<std::size_t>(dataset.n_classes));
  for (std::int64_t i = 0; i < n; ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  struct Shard {
    std::int64_t label;
    std::int64_t first;  // offset into by_class[label]
  };
  std::vector<Shard> shards;
  for (std::int64_t c = 0; c < dataset.n_classes; ++c) {
    const auto available = static_cast<std::int64_t>(by_class[static_cast<std::size_t>(c)].size());
    for (std::int64_t s = 0; s + shard_size <= available; s += shard_size) {
      shards.push_back(Shard{c, s});
    }
  }
  const std::int64_t shards_needed = n_clients * classes_per_client;
  if (static_cast<std::int64_t>(shards.size()) < shards_needed) {
    std::ostringstream msg;
    msg << "partition_label_skew: infeasible, only " << shards.size()
        << " complete shards of size " << shard_size << " but "
        << shards_needed << " are needed";
    throw std::invalid_argument(msg.str());
  }

  rng::RngStream stream(
      rng::derive_seed(seed, rng::SeedDomain::ClientSampling, 0, 0));
  std::vector<std::int64_t> order(shards.size());
  std::iota(order.begin(), order.end(), std::int64_t{0});
  rng::shuffle(stream, order);

  // Per-class shard queues in shuffled order.
  std::vector<std::vector<std::int64_t>> queue(
      static_cast<std::size_t>(dataset.n_classes));
  for (std::int64_t shard_id : order) {
    queue[static_cast<std::size_t>(shards[static_cast<std::size_t>(shard_id)].label)]
        .push_back(shard_id);
  }
  std::vector<std::size_t> head(static_cast<std::size_t>(dataset.n_classes), 0);

  Partition partition;
  partition.base_seed = seed;
  partition.n_clients = n_clients;
  partition.classes_per_client = classes_per_client;
  partition.assignment.resize(static_cast<std::size_t>(n_clients));

  std::vector<std::int64_t> candidates;
  for (std::int64_t client = 0; client < n_clients; ++client) {
    candidates.clear();
    for (std::int64_t c = 0; c < dataset.n_classes; ++c) {
      if (head[static_cast<std::size_t>(c)] <
          queue[static_cast<std::size_t>(c)].size()) {
        candidates.push_back(c);
      }
    }
    if (static_cast<std::int64_t>(candidates.size()) < classes_per_client) {
      std::ostringstream msg;
      msg << "partition_label_skew: infeasible, client " << client
          << " cannot be dealt " << classes_per_client
          << " distinct classes from remaining shard supply";
      throw std::invalid_argument(msg.str());
    }
    // Most shards remaining first; ties by the shuffled position of the
    // class's next shard so class combinations follow the seed.
    std::sort(candidates.begin(), candidates.end(),
              [&](std::int64_t a, std::int64_t b) {
                const auto ra = queue[static_cast<std::size_t>(a)].size() -
                                head[static_cast<std::size_t>(a)];
                const auto rb = queue[static_cast<std::size_t>(b)].size() -
                                head[static_cast<std::size_t>(b)];
                if (ra != rb) return ra > rb;
                return queue[static_cast<std::size_t>(a)][head[static_cast<std::size_t>(a)]] <
                       queue[static_cast<std::size_t>(b)][head[static_cast<std::size_t>(b)]];
              });
    auto& indices = partition.assignment[static_cast<std::size_t>(client)];
    indices.reserve(static_cast<std::size_t>(samples_per_client));
    for (std::int64_t pick = 0; pick < classes_per_client; ++pick) {
      const auto c = static_cast<std::size_t>(candidates[static_cast<std::size_t>(pick)]);
      const auto shard_id = queue[c][head[c]++];
      const Shard& shard = shards[static_cast<std::size_t>(shard_id)];
      const auto& pool = by_class[static_cast<std::size_t>(shard.label)];
      for (std::int64_t i = 0; i < shard_size; ++i) {
        indices.push_back(pool[static_cast<std::size_t>(shard.first + i)]);
      }
    }
    std::sort(indices.begin(), indices.end());
  }
  return partition;
}

namespace detail {

// Canonical serialization: sorted keys, no whitespace. nlohmann::json keeps
// object keys sorted, so dump() is already canonical.
inline nlohmann::json partition_body(const Partition& partition) {
  nlohmann::json body;
  body["version"] = 1;
  body["base_seed"] = partition.base_seed;
  body["n_clients"] = partition.n_clients;
  body["classes_per_client"] = partition.classes_per_client;
  body["assignment"] = partition.assignment;
  return body;
}

}  // namespace detail

inline void save_partition(const Partition& partition,
                           const std::filesystem::path& path) {
  nlohmann::json body = detail::partition_body(partition);
  const std::uint32_t crc = codec::crc32_of(body.dump());
  body["crc32"] = crc;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_partition: cannot open " + path.string());
  }
  out << body.dump();
  if (!out) {
    throw std::runtime_error("save_partition: write failed for " + path.string());
  }
}

inline Partition load_partition(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PartitionParseError("load_partition: cannot open " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  nlohmann::json parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw PartitionParseError("load_partition: malformed JSON in " +
                              path.string());
  }
  for (const char* key :
       {"version", "base_seed", "n_clients", "classes_per_client",
        "assignment", "crc32"}) {
    if (!parsed.contains(key)) {
      throw PartitionParseError(std::string("load_partition: missing key \"") +
                                key + "\" in " + path.string());
    }
  }
  if (!parsed["version"].is_number_integer() ||
      parsed["version"].get<std::int64_t>() != 1) {
    throw PartitionVersionError("load_partition: unsupported version in " +
                                path.string());
  }

  Partition partition;
  try {
    partition.base_seed = parsed["base_seed"].get<std::uint64_t>();
    partition.n_clients = parsed["n_clients"].get<std::int64_t>();
    partition.classes_per_client = parsed["classes_per_client"].get<std::int64_t>();
    partition.assignment =
        parsed["assignment"].get<std::vector<std::vector<std::int64_t>>>();
  } catch (const nlohmann::json::exception&) {
    throw PartitionParseError("load_partition: malformed structure in " +
                              path.string());
  }
  if (!parsed["crc32"].is_number_unsigned() &&
      !parsed["crc32"].is_number_integer()) {
    throw PartitionParseError("load_partition: malformed crc32 in " +
                              path.string());
  }
  const auto stored_crc = parsed["crc32"].get<std::uint64_t>();
  const std::uint32_t actual_crc =
      codec::crc32_of(detail::partition_body(partition).dump());
  if (stored_crc != actual_crc) {
    throw PartitionChecksumError("load_partition: checksum mismatch in " +
                                 path.string());
  }
  return partition;
}

// Horizontal flip with probability 0.5 (one draw), then a pad-4-reflect
// random crop back to HxW (two bounded draws). All three draws happen for
// every sample regardless of outcome, so consumption is exactly 3 per sample.
inline Tensor augment(const Tensor& batch, rng::RngStream& stream) {
  const auto& shape = batch.shape();
  if (shape.size() != 4) {
    throw std::invalid_argument("augment: batch must be [B,C,H,W]");
  }
  const std::int64_t b_count = shape[0], channels = shape[1], h = shape[2], w = shape[3];
  if (h < 5 || w < 5) {
    throw std::invalid_argument("augment: spatial dims must be >= 5 for pad-4 reflect");
  }
  constexpr std::int64_t kPad = 4;
  // Reflection without edge duplication; pad <= dim-1 keeps one bounce enough.
  const auto reflect = [](std::int64_t i, std::int64_t size) {
    if (i < 0) return -i;
    if (i >= size) return 2 * size - 2 - i;
    return i;
  };

  Tensor out = Tensor::zeros({b_count, channels, h, w});
  const auto src = batch.data();
  auto dst = out.data();
  for (std::int64_t b = 0; b < b_count; ++b) {
    const bool flip = rng::next_uniform(stream) < 0.5;
    const auto dy = static_cast<std::int64_t>(rng::next_bounded(stream, 2 * kPad + 1));
    const auto dx = static_cast<std::int64_t>(rng::next_bounded(stream, 2 * kPad + 1));
    for (std::int64_t c = 0; c < channels; ++c) {
      const std::size_t plane =
          static_cast<std::size_t>((b * channels + c) * h * w);
      for (std::int64_t y = 0; y < h; ++y) {
        const std::int64_t sy = reflect(y + dy - kPad, h);
        for (std::int64_t x = 0; x < w; ++x) {
          std::int64_t sx = reflect(x + dx - kPad, w);
          if (flip) sx = w - 1 - sx;
          dst[plane + static_cast<std::size_t>(y * w + x)] =
              src[plane + static_cast<std::size_t>(sy * w + sx)];
        }
      }
    }
  }
  return out;
}

}  // namespace blazefl::data
