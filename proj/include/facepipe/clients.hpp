#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facepipe/config.hpp"

namespace facepipe {

// ---------------------------------------------------------------------------
// Interfaces. All requests/responses travel as raw bytes or text; transport
// problems surface as TransportError so callers can retry, anything else is a
// protocol violation.
// ---------------------------------------------------------------------------

class LlmClient {
public:
    virtual ~LlmClient() = default;
    /// Sends a prompt plus a PNG attachment, returns the raw completion text.
    virtual std::string complete(const std::string& prompt,
                                 std::span<const std::uint8_t> image_png) = 0;
};

class GeneratorClient {
public:
    virtual ~GeneratorClient() = default;
    virtual std::vector<std::uint8_t> generate(const std::string& prompt) = 0;
};

class ExpanderClient {
public:
    virtual ~ExpanderClient() = default;
    virtual std::vector<std::vector<std::uint8_t>> expand(std::span<const std::uint8_t> image,
                                                          int count) = 0;
};

struct FaceBox {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
    double confidence = 0.0;
};

class DetectorClient {
public:
    virtual ~DetectorClient() = default;
    virtual std::vector<FaceBox> detect(std::span<const std::uint8_t> image) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic in-process implementations.
// ---------------------------------------------------------------------------

/// Plays back a fixed list of responses, repeating the last one when
/// exhausted. A nullopt entry simulates a transport failure.
class ScriptedLlmClient : public LlmClient {
public:
    explicit ScriptedLlmClient(std::vector<std::optional<std::string>> script);
    std::string complete(const std::string& prompt,
                         std::span<const std::uint8_t> image_png) override;
    std::size_t calls() const { return calls_; }

private:
    std::vector<std::optional<std::string>> script_;
    std::size_t calls_ = 0;
};

/// Answers from a recorded transcript, keyed by the attachment digest.
class ReplayLlmClient : public LlmClient {
public:
    explicit ReplayLlmClient(const std::filesystem::path& transcript_jsonl);
    std::string complete(const std::string& prompt,
                         std::span<const std::uint8_t> image_png) override;

private:
    std::map<std::string, std::string> by_digest_;
};

/// Derives a small image deterministically from the prompt text.
class MockGeneratorClient : public GeneratorClient {
public:
    explicit MockGeneratorClient(int size = 64) : size_(size) {}
    std::vector<std::uint8_t> generate(const std::string& prompt) override;

private:
    int size_;
};

/// Echoes the reference image: every variant is a byte-identical copy.
class MockExpanderClient : public ExpanderClient {
public:
    std::vector<std::vector<std::uint8_t>> expand(std::span<const std::uint8_t> image,
                                                  int count) override;
};

/// mode "accept": one centered box at confidence 0.9; "reject": no faces.
class MockDetectorClient : public DetectorClient {
public:
    explicit MockDetectorClient(std::string mode = "accept") : mode_(std::move(mode)) {}
    std::vector<FaceBox> detect(std::span<const std::uint8_t> image) override;

private:
    std::string mode_;
};

// ---------------------------------------------------------------------------
// HTTP adapters. JSON bodies, binary payloads base64-encoded; the API key is
// read from the configured environment variable and sent as a bearer token.
// ---------------------------------------------------------------------------

class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(LlmSettings settings) : settings_(std::move(settings)) {}
    std::string complete(const std::string& prompt,
                         std::span<const std::uint8_t> image_png) override;

private:
    LlmSettings settings_;
};

class HttpGeneratorClient : public GeneratorClient {
public:
    explicit HttpGeneratorClient(AdapterSettings settings) : settings_(std::move(settings)) {}
    std::vector<std::uint8_t> generate(const std::string& prompt) override;

private:
    AdapterSettings settings_;
};

class HttpExpanderClient : public ExpanderClient {
public:
    explicit HttpExpanderClient(AdapterSettings settings) : settings_(std::move(settings)) {}
    std::vector<std::vector<std::uint8_t>> expand(std::span<const std::uint8_t> image,
                                                  int count) override;

private:
    AdapterSettings settings_;
};

class HttpDetectorClient : public DetectorClient {
public:
    explicit HttpDetectorClient(AdapterSettings settings) : settings_(std::move(settings)) {}
    std::vector<FaceBox> detect(std::span<const std::uint8_t> image) override;

private:
    AdapterSettings settings_;
};

// ---------------------------------------------------------------------------
// Gateway: serializes access to one LlmClient (at most one request in
// flight) and applies a token-bucket rate limit when rate_per_sec > 0.
// ---------------------------------------------------------------------------

class LlmGateway {
public:
    LlmGateway(std::unique_ptr<LlmClient> client, double rate_per_sec, int burst);

    std::string complete(const std::string& prompt, std::span<const std::uint8_t> image_png);

private:
    std::unique_ptr<LlmClient> client_;
    std::mutex mutex_;
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_refill_;
};

/// Builds an LLM gateway from settings; kind "none" yields nullptr.
std::unique_ptr<LlmGateway> make_llm_gateway(const LlmSettings& settings);

std::unique_ptr<GeneratorClient> make_generator_client(const AdapterSettings& settings);
std::unique_ptr<ExpanderClient> make_expander_client(const AdapterSettings& settings);
std::unique_ptr<DetectorClient> make_detector_client(const AdapterSettings& settings);

} // namespace facepipe
