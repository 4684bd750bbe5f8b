#pragma once

#include <chrono>
#include <memory>
#include <string>

namespace clarion {

/// Text-in/text-out completion endpoint used by the remote judge and the
/// remote intent summarizer.
class ChatClient {
  public:
    virtual ~ChatClient() = default;
    /// Returns the model reply. Throws RemoteError on failure.
    virtual std::string complete(std::string const &prompt) = 0;
    [[nodiscard]] virtual std::string const &endpoint() const = 0;
};

struct HttpChatOptions {
    std::string endpoint;  ///< http://host[:port]/path
    std::string api_key;
    std::string model = "gpt-4o";
    std::chrono::milliseconds timeout{30000};
    int attempts = 3;
    std::chrono::milliseconds backoff{250};  ///< doubled after every failed attempt
};

/// POSTs {"model", "messages": [{"role": "user", "content": prompt}],
/// "temperature": 0} and reads choices[0].message.content from the reply.
/// Safe for concurrent use; each call opens its own connection.
class HttpChatClient final : public ChatClient {
  public:
    explicit HttpChatClient(HttpChatOptions options);
    std::string complete(std::string const &prompt) override;
    [[nodiscard]] std::string const &endpoint() const override { return options_.endpoint; }

  private:
    HttpChatOptions options_;
    std::string host_;
    std::string path_;
};

/// Options from JUDGE_ENDPOINT / JUDGE_API_KEY (and optional JUDGE_MODEL).
/// Throws UsageError when JUDGE_ENDPOINT is unset.
HttpChatOptions chat_options_from_env();

} // namespace clarion
