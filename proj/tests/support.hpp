#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "vconf/dataset.hpp"
#include "vconf/detail/rng.hpp"

namespace testsupport {

inline std::filesystem::path data_dir() { return VCONF_TEST_DATA_DIR; }

/// Fresh directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("vconf_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// n synthetic multiple-choice questions with `n_options` options each and
/// seed-determined gold labels.
inline vconf::Dataset make_synthetic_dataset(std::size_t n, std::size_t n_options,
                                             std::uint64_t seed) {
    vconf::detail::SplitMix64 rng(seed);
    vconf::Dataset ds;
    ds.name = "custom";
    for (std::size_t i = 0; i < n; ++i) {
        vconf::QARecord rec;
        rec.id = "q" + std::to_string(i);
        rec.question = "Synthetic question " + std::to_string(i) + ": which option is correct?";
        for (std::size_t o = 0; o < n_options; ++o)
            rec.options.push_back({static_cast<char>('A' + o),
                                   "choice " + std::to_string(i) + "-" + std::to_string(o)});
        rec.gold = static_cast<char>('A' + rng.below(n_options));
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

inline std::filesystem::path write_dataset(const vconf::Dataset& ds,
                                           const std::filesystem::path& dir,
                                           const std::string& name = "dataset.jsonl") {
    auto path = dir / name;
    vconf::write_normalized(ds, path);
    return path;
}

} // namespace testsupport
