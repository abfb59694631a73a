//! Recording-to-packet signal processing.

pub mod filter;
pub mod packet;
pub mod reference;
pub mod spectrum;

pub use filter::{decimate, SosFilter};
pub use packet::{
    build_feature_streams, packet_grid, packetize, FeatureOptions, Packet, PacketGrid, PacketStream, PacketizerConfig,
    RawWindows,
};
pub use reference::{car, EmsConfig, ExpStandardizer};
pub use spectrum::{bandpower, welch_psd, BandSpec, Psd, Welch};
