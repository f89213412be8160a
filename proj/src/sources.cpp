#include <fcntl.h>
#include <termios.h>
#include <unistd.h>

#include <array>
#include <boost/asio.hpp>
#include <cerrno>
#include <cstring>

#include "bci/acquisition.hpp"
#include "bci/error.hpp"
#include "bci/raw_recording.hpp"

namespace bci {

// ---------------------------------------------------------------------------
// File replay

struct ReplaySource::Impl {
    explicit Impl(const std::string& path) : reader(path) {}
    RawRecordingReader reader;
};

ReplaySource::ReplaySource(const std::string& path) : impl_(std::make_unique<Impl>(path)) {}
ReplaySource::~ReplaySource() = default;

std::optional<RawSample> ReplaySource::next() { return impl_->reader.next(); }
const SamplingConfig& ReplaySource::config() const { return impl_->reader.config(); }

// ---------------------------------------------------------------------------
// TCP

struct TcpSource::Impl {
    Impl(SamplingConfig cfg) : socket(io), decoder(cfg) {}
    boost::asio::io_context io;
    boost::asio::ip::tcp::socket socket;
    CytonStreamDecoder decoder;
    std::deque<RawSample> ready;
    bool eof = false;
};

TcpSource::TcpSource(const std::string& host, std::uint16_t port, SamplingConfig cfg)
    : cfg_(cfg), impl_(std::make_unique<Impl>(cfg)) {
    namespace ip = boost::asio::ip;
    boost::system::error_code ec;
    ip::tcp::resolver resolver(impl_->io);
    auto endpoints = resolver.resolve(host, std::to_string(port), ec);
    if (!ec) boost::asio::connect(impl_->socket, endpoints, ec);
    if (ec) {
        raise(ErrorKind::SourceUnavailable,
              "tcp " + host + ":" + std::to_string(port) + ": " + ec.message());
    }
}

TcpSource::~TcpSource() = default;

std::optional<RawSample> TcpSource::next() {
    std::array<std::uint8_t, 33 * 16> buf{};
    std::vector<RawSample> decoded;
    while (impl_->ready.empty() && !impl_->eof) {
        boost::system::error_code ec;
        const std::size_t n = impl_->socket.read_some(boost::asio::buffer(buf), ec);
        if (ec == boost::asio::error::eof) {
            impl_->eof = true;
        } else if (ec) {
            raise(ErrorKind::SourceLost, "tcp read: " + ec.message());
        }
        decoded.clear();
        impl_->decoder.feed({buf.data(), n}, decoded);
        for (auto& s : decoded) impl_->ready.push_back(std::move(s));
    }
    if (impl_->ready.empty()) return std::nullopt;
    RawSample s = std::move(impl_->ready.front());
    impl_->ready.pop_front();
    return s;
}

std::uint64_t TcpSource::dropped() const { return impl_->decoder.dropped(); }

// ---------------------------------------------------------------------------
// Serial

SerialSource::SerialSource(const std::string& device, SamplingConfig cfg)
    : cfg_(cfg), decoder_(cfg) {
    fd_ = ::open(device.c_str(), O_RDWR | O_NOCTTY);
    if (fd_ < 0) {
        raise(ErrorKind::SourceUnavailable, device + ": " + std::strerror(errno));
    }
    termios tio{};
    if (::tcgetattr(fd_, &tio) == 0) {
        ::cfmakeraw(&tio);
        ::cfsetispeed(&tio, B115200);
        ::cfsetospeed(&tio, B115200);
        tio.c_cflag |= CLOCAL | CREAD;
        tio.c_cc[VMIN] = 1;
        tio.c_cc[VTIME] = 0;
        ::tcsetattr(fd_, TCSANOW, &tio);
        // 'b' starts streaming on the Cyton.
        const char start = 'b';
        [[maybe_unused]] auto w = ::write(fd_, &start, 1);
    }
}

SerialSource::~SerialSource() {
    if (fd_ >= 0) {
        const char stop = 's';
        [[maybe_unused]] auto w = ::write(fd_, &stop, 1);
        ::close(fd_);
    }
}

std::optional<RawSample> SerialSource::next() {
    std::array<std::uint8_t, 33 * 8> buf{};
    std::vector<RawSample> decoded;
    while (ready_.empty()) {
        const auto n = ::read(fd_, buf.data(), buf.size());
        if (n == 0) return std::nullopt;
        if (n < 0) {
            if (errno == EINTR) continue;
            raise(ErrorKind::SourceLost, std::string("serial read: ") + std::strerror(errno));
        }
        decoded.clear();
        decoder_.feed({buf.data(), static_cast<std::size_t>(n)}, decoded);
        for (auto& s : decoded) ready_.push_back(std::move(s));
    }
    RawSample s = std::move(ready_.front());
    ready_.pop_front();
    return s;
}

std::uint64_t SerialSource::dropped() const { return decoder_.dropped(); }

}  // namespace bci
