#pragma once

// Shared test scaffolding: temp directories and small dataset builders.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "malmem/dataset.hpp"
#include "malmem/matrix.hpp"

namespace testutil {

/// Self-cleaning unique temp directory.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("malmem_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

/// Tiny dataset in the production CSV layout (category + features + class).
inline std::string small_malmem_csv() {
    return "Category,pslist.nproc,dlllist.ndlls,handles.nhandles,Class\n"
           "Benign,45,210,5200,Benign\n"
           "Benign,39,198,4800,Benign\n"
           "Trojan-Zeus-05af7,61,260,7400,Malware\n"
           "Trojan-Emotet-1b22c,58,255,7100,Malware\n"
           "Spyware-Gator-77e01,52,240,6900,Malware\n"
           "Spyware-CWS-90ddef,50,251,6600,Malware\n"
           "Ransomware-Shade-3fa2b,66,230,8100,Malware\n"
           "Ransomware-Ako-cc138,64,225,7900,Malware\n";
}

inline malmem::Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
    malmem::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

}  // namespace testutil
