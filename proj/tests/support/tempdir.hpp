#ifndef PETSEG_TESTS_TEMPDIR_HPP
#define PETSEG_TESTS_TEMPDIR_HPP

#include <filesystem>
#include <string>

namespace testsupport {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Whole-file read, for byte-level comparisons.
std::string slurp(const std::filesystem::path& path);

} // namespace testsupport

#endif
