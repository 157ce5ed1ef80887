//! Fixture loading, verification suites and JSON reports for the
//! `algebroid-cc` command.

pub mod fixture;
pub mod report;
pub mod suites;

pub use fixture::{load_fixture, parse_fixture, Fixture, FixtureError};
pub use report::{Options, Report};
pub use suites::{identities, jet_report, modular, mu, run_suite, Suite};
