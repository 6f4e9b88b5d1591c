//! Static space-time diagrams as self-contained SVG.
//!
//! The line style draws one vertical line per site with time running upward
//! and four stroke styles for the site states: healthy-active gray solid,
//! healthy-dormant gray dotted, infected-active black solid,
//! infected-dormant black dashed. The density style paints a cell grid and
//! works in any dimension (sites flattened row-major).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CpsError, Result};
use crate::lattice::Lattice;
use crate::sites::{Configuration, SiteState};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvgStyle {
    Lines,
    Density,
}

const MARGIN: f64 = 40.0;
const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 480.0;

fn stroke_attrs(state: SiteState) -> &'static str {
    match (state.infected, state.activity) {
        (false, crate::rates::Activity::Active) => "stroke=\"#999999\"",
        (false, crate::rates::Activity::Dormant) => {
            "stroke=\"#999999\" stroke-dasharray=\"1.5,3.5\""
        }
        (true, crate::rates::Activity::Active) => "stroke=\"#000000\"",
        (true, crate::rates::Activity::Dormant) => "stroke=\"#000000\" stroke-dasharray=\"6,3\"",
    }
}

fn cell_fill(state: SiteState) -> &'static str {
    match (state.infected, state.activity) {
        (false, crate::rates::Activity::Active) => "#cccccc",
        (false, crate::rates::Activity::Dormant) => "#f2f2f2",
        (true, crate::rates::Activity::Active) => "#000000",
        (true, crate::rates::Activity::Dormant) => "#808080",
    }
}

/// Renders snapshots into an SVG document. Byte output is a pure function of
/// the inputs.
pub fn render_spacetime_svg(
    lattice: &Lattice,
    times: &[f64],
    snapshots: &[Configuration],
    style: SvgStyle,
) -> Result<String> {
    if times.len() != snapshots.len() {
        return Err(CpsError::precondition(
            "one snapshot per sample time required",
        ));
    }
    if style == SvgStyle::Lines && lattice.spec().dimension() != 1 {
        return Err(CpsError::precondition(
            "line rendering needs a one-dimensional lattice; use the density style",
        ));
    }

    let width = PLOT_W + 2.0 * MARGIN;
    let height = PLOT_H + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>"
    );
    // Axes: sites along the bottom, time upward on the left.
    let _ = writeln!(
        svg,
        "<line x1=\"{m:.1}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"#333333\"/>",
        m = MARGIN,
        b = MARGIN + PLOT_H,
        r = MARGIN + PLOT_W
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{m:.1}\" y1=\"{b:.1}\" x2=\"{m:.1}\" y2=\"{t:.1}\" stroke=\"#333333\"/>",
        m = MARGIN,
        b = MARGIN + PLOT_H,
        t = MARGIN
    );

    let n = lattice.n_sites();
    if !times.is_empty() && n > 0 {
        let t_max = times.last().copied().unwrap().max(1e-12);
        let y_of = |t: f64| MARGIN + PLOT_H - (t / t_max) * PLOT_H;
        match style {
            SvgStyle::Lines => {
                let dx = PLOT_W / n as f64;
                for site in 0..n {
                    let x = MARGIN + (site as f64 + 0.5) * dx;
                    for k in 0..times.len() {
                        let t0 = times[k];
                        let t1 = if k + 1 < times.len() {
                            times[k + 1]
                        } else {
                            t_max
                        };
                        if t1 <= t0 {
                            continue;
                        }
                        let state = snapshots[k].site_state(site);
                        let _ = writeln!(
                            svg,
                            "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{y1:.2}\" \
                             {attrs} stroke-width=\"2\"/>",
                            y0 = y_of(t0),
                            y1 = y_of(t1),
                            attrs = stroke_attrs(state)
                        );
                    }
                }
            }
            SvgStyle::Density => {
                let dx = PLOT_W / n as f64;
                for k in 0..times.len() {
                    let t0 = times[k];
                    let t1 = if k + 1 < times.len() {
                        times[k + 1]
                    } else {
                        t_max
                    };
                    if t1 <= t0 {
                        continue;
                    }
                    let y1 = y_of(t0);
                    let y0 = y_of(t1);
                    for site in 0..n {
                        let state = snapshots[k].site_state(site);
                        let _ = writeln!(
                            svg,
                            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
                             fill=\"{fill}\"/>",
                            x = MARGIN + site as f64 * dx,
                            y = y0,
                            w = dx,
                            h = y1 - y0,
                            fill = cell_fill(state)
                        );
                    }
                }
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::sites::SiteSet;

    #[test]
    fn empty_trajectory_axes_only() {
        let lat = LatticeSpec::ring(5).compile().unwrap();
        let svg = render_spacetime_svg(&lat, &[], &[], SvgStyle::Lines).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<line"));
        assert!(!svg.contains("stroke-width=\"2\""));
    }

    #[test]
    fn single_infected_active_site_is_solid_black() {
        let lat = LatticeSpec::ring(1).compile().unwrap();
        let snaps: Vec<Configuration> = (0..3)
            .map(|_| Configuration::new(SiteSet::full(1), SiteSet::full(1)))
            .collect();
        let svg = render_spacetime_svg(&lat, &[0.0, 1.0, 2.0], &snaps, SvgStyle::Lines).unwrap();
        assert!(svg.contains("stroke=\"#000000\""));
        assert!(!svg.contains("stroke-dasharray=\"6,3\""));
    }

    #[test]
    fn deterministic_bytes() {
        let lat = LatticeSpec::ring(4).compile().unwrap();
        let snaps: Vec<Configuration> = (0..4)
            .map(|i| {
                Configuration::new(
                    SiteSet::from_sites(4, [i % 4]),
                    SiteSet::from_sites(4, [0, 1]),
                )
            })
            .collect();
        let times = [0.0, 0.5, 1.0, 1.5];
        let a = render_spacetime_svg(&lat, &times, &snaps, SvgStyle::Lines).unwrap();
        let b = render_spacetime_svg(&lat, &times, &snaps, SvgStyle::Lines).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_dimensional_needs_density_style() {
        let lat = LatticeSpec::torus(vec![3, 3]).compile().unwrap();
        let snaps = vec![Configuration::empty(9)];
        assert!(render_spacetime_svg(&lat, &[1.0], &snaps, SvgStyle::Lines).is_err());
        assert!(render_spacetime_svg(&lat, &[1.0], &snaps, SvgStyle::Density).is_ok());
    }
}
