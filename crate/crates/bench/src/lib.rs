//! Fixtures shared by the benchmarks.

use crosspoint_core::osm::{Method, OsmConfig};
use crosspoint_core::{Engine, InterfaceMatrix, Load, Result};

/// Error-equation engine with `grid x grid` cells per `(0, 2)^2` subdomain.
pub fn engine(grid: usize, subdomains: (usize, usize), method: Method) -> Result<Engine> {
    let cfg = OsmConfig {
        cells: (grid * subdomains.0, grid * subdomains.1),
        extent: (2.0 * subdomains.0 as f64, 2.0 * subdomains.1 as f64),
        subdomains,
        p: 2.0,
        variant: InterfaceMatrix::Lumped,
        method,
        ..Default::default()
    };
    Engine::new(cfg.decomposition()?, cfg.params(), method, &Load::Zero)
}
