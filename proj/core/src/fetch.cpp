#include <curl/curl.h>

#include <array>
#include <cstdio>
#include <filesystem>

#include "contbench/data.hpp"
#include "contbench/errors.hpp"
#include "contbench/experiment.hpp"

namespace contbench {

namespace {

struct DatasetSource {
    const char* name;
    const char* default_base;  // serves the four canonical file names
};

constexpr std::array<DatasetSource, 3> kSources = {{
    {"mnist", "https://ossci-datasets.s3.amazonaws.com/mnist/"},
    {"fashion", "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"},
    {"kmnist", "http://codh.rois.ac.jp/kmnist/dataset/kmnist/"},
}};

struct FileSpec {
    const char* stem;
    size_t dims;      // expected dimension count
    uint32_t items;   // expected dims[0]
};

constexpr std::array<FileSpec, 4> kFiles = {{
    {"train-images-idx3-ubyte", 3, 60000},
    {"train-labels-idx1-ubyte", 1, 60000},
    {"t10k-images-idx3-ubyte", 3, 10000},
    {"t10k-labels-idx1-ubyte", 1, 10000},
}};

bool file_exists(const std::string& path) {
    std::error_code ec;
    return std::filesystem::exists(path, ec);
}

void validate_idx_file(const std::string& path, const FileSpec& spec) {
    const IdxArray arr = parse_idx(read_file_maybe_gzip(path));
    if (arr.dims.size() != spec.dims)
        throw DataFormatError(path + ": expected " + std::to_string(spec.dims) + " dims, got " +
                              std::to_string(arr.dims.size()));
    if (arr.dims[0] != spec.items)
        throw DataFormatError(path + ": expected " + std::to_string(spec.items) + " items, got " +
                              std::to_string(arr.dims[0]));
    if (spec.dims == 3 && (arr.dims[1] != 28 || arr.dims[2] != 28))
        throw DataFormatError(path + ": expected 28x28 images");
}

size_t write_to_file(char* data, size_t size, size_t nmemb, void* userdata) {
    return std::fwrite(data, size, nmemb, static_cast<std::FILE*>(userdata));
}

void download(const std::string& url, const std::string& dest) {
    std::FILE* f = std::fopen(dest.c_str(), "wb");
    if (!f) throw IoError("cannot write " + dest);

    CURL* curl = curl_easy_init();
    if (!curl) {
        std::fclose(f);
        throw IoError("curl initialization failed");
    }
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_MAXREDIRS, 10L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_to_file);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, f);
    curl_easy_setopt(curl, CURLOPT_USERAGENT, "contbench-fetch/1.0");
    curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 30L);

    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    const bool write_failed = std::fclose(f) != 0;

    if (rc != CURLE_OK || write_failed) {
        std::error_code ec;
        std::filesystem::remove(dest, ec);
        throw IoError("download failed for " + url + ": " +
                      (rc != CURLE_OK ? curl_easy_strerror(rc) : "write error"));
    }
}

}  // namespace

void fetch_datasets(const std::string& data_root,
                    const std::map<std::string, std::string>& base_url_overrides) {
    for (const DatasetSource& source : kSources) {
        const std::string dir = data_root + "/" + source.name;
        std::filesystem::create_directories(dir);

        std::string base = source.default_base;
        if (auto it = base_url_overrides.find(source.name); it != base_url_overrides.end())
            base = it->second;
        if (!base.empty() && base.back() != '/') base += '/';

        for (const FileSpec& spec : kFiles) {
            const std::string gz_path = dir + "/" + spec.stem + ".gz";
            const std::string raw_path = dir + "/" + spec.stem;

            // Present and valid in either form: leave it alone.
            bool have = false;
            for (const std::string& path : {gz_path, raw_path}) {
                if (!file_exists(path)) continue;
                validate_idx_file(path, spec);  // invalid existing file: loud failure
                have = true;
                break;
            }
            if (have) continue;

            const std::string url = base + spec.stem + ".gz";
            download(url, gz_path);
            try {
                validate_idx_file(gz_path, spec);
            } catch (...) {
                std::error_code ec;
                std::filesystem::remove(gz_path, ec);
                throw;
            }
        }
    }
}

}  // namespace contbench
