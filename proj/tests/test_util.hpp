#ifndef XRFPID_TEST_UTIL_HPP
#define XRFPID_TEST_UTIL_HPP

#include <filesystem>
#include <string>

namespace xrfpid::test {

inline std::string data_dir() { return XRFPID_DATA_DIR; }

inline std::string physics_path() {
    return (std::filesystem::path(data_dir()) / "physics.dat").string();
}

inline std::string background_path() {
    return (std::filesystem::path(data_dir()) / "default_background.xsp").string();
}

// Unique writable scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("xrfpid_test_" + tag + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }
    std::string dir() const { return path_.string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

}  // namespace xrfpid::test

#endif
