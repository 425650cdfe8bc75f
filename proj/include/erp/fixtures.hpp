#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "erp/errors.hpp"
#include "erp/prompt.hpp"
#include "erp/sha256.hpp"

namespace erp {

// Shipped prompt sets. Each pairs a structured exemplar definition with a
// golden rendering; `verify` proves the renderer still reproduces the
// golden byte-for-byte, so prompt-affecting changes cannot slip through.

struct FixtureEntry {
    std::string id;
    std::string exemplar_file;  // relative to the assets directory
    std::string prompt_file;    // golden rendering, relative likewise
};

inline const std::vector<FixtureEntry>& fixture_registry() {
    static const std::vector<FixtureEntry> entries = {
        {"gsm8k-math-erp", "exemplars/gsm8k_math_erp.json",
         "prompts/v1/gsm8k-math-erp.txt"},
        {"aqua-erp", "exemplars/aqua_erp.json", "prompts/v1/aqua-erp.txt"},
        {"strategyqa-erp-cat", "exemplars/strategyqa_erp_cat.json",
         "prompts/v1/strategyqa-erp-cat.txt"},
        {"strategyqa-erp-nocat", "exemplars/strategyqa_erp_nocat.json",
         "prompts/v1/strategyqa-erp-nocat.txt"},
        {"csqa-erp", "exemplars/csqa_erp.json", "prompts/v1/csqa-erp.txt"},
    };
    return entries;
}

inline std::optional<FixtureEntry> find_fixture(std::string_view id) {
    for (const auto& e : fixture_registry()) {
        if (e.id == id) return e;
    }
    return std::nullopt;
}

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::fixture_missing, "missing file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::filesystem::path manifest_path(
    const std::filesystem::path& assets_dir) {
    return assets_dir / "prompts" / "v1" / "MANIFEST.json";
}

}  // namespace detail

inline std::string render_fixture(const FixtureEntry& e,
                                  const std::filesystem::path& assets_dir) {
    auto exemplars = load_exemplar_file(assets_dir / e.exemplar_file);
    return render_prompt_set(exemplars, "v1");
}

struct FixtureStatus {
    std::string id;
    bool ok = false;
    std::string detail;    // "ok" or what went wrong
    std::string checksum;  // sha256 of the golden file bytes
    long long first_diff = -1;  // byte offset of the first divergence
};

namespace detail {

inline long long first_diff_offset(const std::string& a,
                                   const std::string& b) {
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
        if (a[i] != b[i]) return static_cast<long long>(i);
    }
    return static_cast<long long>(n);  // one is a prefix of the other
}

}  // namespace detail

// Re-renders every registered prompt set from its exemplar definition and
// byte-compares against the shipped golden, cross-checking the manifest
// checksum. Never throws per-fixture: each entry reports its own status.
inline std::vector<FixtureStatus> verify_fixtures(
    const std::filesystem::path& assets_dir) {
    nlohmann::json manifest;
    {
        std::ifstream in(detail::manifest_path(assets_dir));
        require(in.good(), Errc::fixture_missing,
                "missing manifest: " + detail::manifest_path(assets_dir).string());
        manifest = nlohmann::json::parse(in, nullptr, false);
        require(!manifest.is_discarded(), Errc::malformed_record,
                "fixture manifest is not valid JSON");
    }
    const auto& files = manifest.at("files");

    std::vector<FixtureStatus> out;
    for (const auto& e : fixture_registry()) {
        FixtureStatus st;
        st.id = e.id;
        try {
            std::string rendered = render_fixture(e, assets_dir);
            std::string golden =
                detail::read_file_bytes(assets_dir / e.prompt_file);
            st.checksum = sha256_hex(golden);
            std::string name =
                std::filesystem::path(e.prompt_file).filename().string();
            if (rendered != golden) {
                st.first_diff = detail::first_diff_offset(rendered, golden);
                st.detail = "rendered text differs from golden at byte " +
                            std::to_string(st.first_diff);
            } else if (!files.contains(name) ||
                       files.at(name).get<std::string>() != st.checksum) {
                st.detail = "manifest checksum mismatch";
            } else {
                st.ok = true;
                st.detail = "ok";
            }
        } catch (const Error& err) {
            st.detail = err.what();
        }
        out.push_back(std::move(st));
    }
    return out;
}

inline bool all_fixtures_ok(const std::vector<FixtureStatus>& statuses) {
    for (const auto& s : statuses) {
        if (!s.ok) return false;
    }
    return true;
}

// Maintainer path: rewrite every golden from the exemplar definitions and
// refresh the manifest. Not reachable from the CLI; goldens only move when
// someone edits the exemplars and deliberately reruns this.
inline void regenerate_fixtures(const std::filesystem::path& assets_dir) {
    nlohmann::json files = nlohmann::json::object();
    for (const auto& e : fixture_registry()) {
        std::string rendered = render_fixture(e, assets_dir);
        auto path = assets_dir / e.prompt_file;
        std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        require(out.good(), Errc::io_error, "cannot write " + path.string());
        out << rendered;
        files[path.filename().string()] = sha256_hex(rendered);
    }
    nlohmann::json manifest;
    manifest["template_version"] = "v1";
    manifest["files"] = files;
    std::ofstream out(detail::manifest_path(assets_dir), std::ios::binary);
    out << manifest.dump(2) << '\n';
}

}  // namespace erp
