// Copyright 2026 The mrtoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mrtoc/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mrtoc/error.hpp"
#include "mrtoc/rng.hpp"

namespace mrtoc {

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    MRTOC_EXPECT(!rows.empty(), "subset: empty row list");
    const auto n = feature_dim();
    std::vector<double> vals(rows.size() * n);
    std::vector<int> labs(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        MRTOC_EXPECT(rows[i] < size(), "subset: row " + std::to_string(rows[i]) + " out of range");
        std::copy_n(features.data() + rows[i] * n, n, vals.data() + i * n);
        labs[i] = labels[rows[i]];
    }
    return Dataset{Tensor::matrix(rows.size(), n, std::move(vals)), std::move(labs), num_classes};
}

void Dataset::validate() const {
    MRTOC_EXPECT(!labels.empty(), "dataset is empty");
    MRTOC_EXPECT(features.rank() == 2 && features.rows() == labels.size(),
                 "dataset features " + shape_string(features.shape()) + " do not match " +
                     std::to_string(labels.size()) + " labels");
    MRTOC_EXPECT(num_classes >= 2, "dataset needs at least 2 classes");
    for (int y : labels)
        MRTOC_EXPECT(y >= 0 && static_cast<std::size_t>(y) < num_classes, "label " + std::to_string(y) + " out of range");
}

Dataset generate_blobs(const BlobSpec& spec, std::uint64_t seed) {
    MRTOC_EXPECT(spec.num_classes >= 2, "blobs: need at least 2 classes");
    MRTOC_EXPECT(spec.dim > 0 && spec.samples_per_class > 0, "blobs: dim and samples_per_class must be positive");
    MRTOC_EXPECT(spec.spread > 0.0, "blobs: spread must be positive");
    Rng root(seed);
    auto center_rng = root.split("centers");
    auto sample_rng = root.split("samples");

    std::vector<double> centers(spec.num_classes * spec.dim);
    for (auto& c : centers) c = center_rng.uniform(-1.0, 1.0);

    const auto n = spec.num_classes * spec.samples_per_class;
    std::vector<double> vals(n * spec.dim);
    std::vector<int> labs(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.num_classes; ++c)
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            labs[row] = static_cast<int>(c);
            for (std::size_t t = 0; t < spec.dim; ++t)
                vals[row * spec.dim + t] = centers[c * spec.dim + t] + spec.spread * sample_rng.normal();
        }
    return Dataset{Tensor::matrix(n, spec.dim, std::move(vals)), std::move(labs), spec.num_classes};
}

namespace {

class IdxReader {
public:
    explicit IdxReader(const std::filesystem::path& path) : path_(path), is_(path, std::ios::binary) {
        if (!is_) throw IngestionError(path_.string() + ": cannot open");
    }

    std::uint32_t u32() {
        std::array<unsigned char, 4> b{};
        read(b.data(), 4);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    void read(unsigned char* dst, std::size_t n) {
        is_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            throw IngestionError(path_.string() + ": truncated at offset " + std::to_string(offset_ + is_.gcount()) +
                                 " (wanted " + std::to_string(n) + " more bytes)");
        offset_ += n;
    }

    std::size_t offset() const noexcept { return offset_; }
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream is_;
    std::size_t offset_ = 0;
};

std::string hex(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    IdxReader img(images);
    if (const auto magic = img.u32(); magic != kImageMagic)
        throw IngestionError(images.string() + ": bad magic " + hex(magic) + " at offset 0, expected 0x803");
    const std::size_t n = img.u32();
    const std::size_t rows = img.u32();
    const std::size_t cols = img.u32();
    if (n == 0 || rows == 0 || cols == 0)
        throw IngestionError(images.string() + ": zero dimension in header at offset 4");

    IdxReader lab(labels);
    if (const auto magic = lab.u32(); magic != kLabelMagic)
        throw IngestionError(labels.string() + ": bad magic " + hex(magic) + " at offset 0, expected 0x801");
    const std::size_t n_labels = lab.u32();
    if (n_labels != n)
        throw IngestionError(labels.string() + ": count mismatch at offset 4: " + std::to_string(n_labels) +
                             " labels vs " + std::to_string(n) + " images in " + images.string());

    const std::size_t dim = rows * cols;
    std::vector<unsigned char> pixels(n * dim);
    img.read(pixels.data(), pixels.size());
    std::vector<unsigned char> raw_labels(n);
    lab.read(raw_labels.data(), raw_labels.size());

    std::vector<double> vals(pixels.size());
    std::transform(pixels.begin(), pixels.end(), vals.begin(), [](unsigned char p) { return p / 255.0; });
    std::vector<int> labs(raw_labels.begin(), raw_labels.end());
    const int max_label = *std::max_element(labs.begin(), labs.end());
    return Dataset{Tensor::matrix(n, dim, std::move(vals)), std::move(labs),
                   std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1)};
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

}  // namespace

std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t p, std::uint64_t seed, int epoch) {
    MRTOC_EXPECT(p >= 1 && p <= ds.size(), "batches: P=" + std::to_string(p) + " must lie in [1, " +
                                                std::to_string(ds.size()) + "]");
    auto rng = Rng(seed).split("batches").split(static_cast<std::uint64_t>(epoch));
    const auto perm = permutation(ds.size(), rng);
    std::vector<std::vector<std::size_t>> out(p);
    const std::size_t base = ds.size() / p, extra = ds.size() % p;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < p; ++b) {
        const std::size_t len = base + (b < extra ? 1 : 0);
        out[b].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return out;
}

std::size_t batch_count_for(std::size_t n, std::size_t batch_size) {
    MRTOC_EXPECT(batch_size > 0, "batch size must be positive");
    return std::max<std::size_t>(1, (n + batch_size - 1) / batch_size);
}

TrainTestSplit split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    ds.validate();
    MRTOC_EXPECT(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0,1)");
    auto rng = Rng(seed).split("split");
    const auto perm = permutation(ds.size(), rng);
    const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(ds.size()));
    MRTOC_EXPECT(n_train > 0 && n_train < ds.size(), "split leaves an empty side");
    std::span<const std::size_t> all(perm);
    return {ds.subset(all.first(n_train)), ds.subset(all.subspan(n_train))};
}

void write_dataset_csv(std::ostream& os, const Dataset& ds, const std::string& comment) {
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "label";
    for (std::size_t t = 0; t < ds.feature_dim(); ++t) os << ",f_" << t;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.labels[i];
        for (std::size_t t = 0; t < ds.feature_dim(); ++t) os << ',' << ds.features.at(i, t);
        os << '\n';
    }
}

}  // namespace mrtoc
