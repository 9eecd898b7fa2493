//! SVG line plot of BER curves on a logarithmic BER axis.

use std::fmt::Write;

use mimo_sic::harness::BerCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const COLORS: [&str; 7] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#000000",
];

/// Renders `curves` as a standalone SVG document. Zero-error points have no
/// place on a log axis and are left out of the polylines.
pub fn render_svg(curves: &[BerCurve], title: &str) -> String {
    let finite = || curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.snr_db), b.max(p.snr_db))
    });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let min_ber = finite()
        .filter(|p| p.ber > 0.0)
        .map(|p| p.ber)
        .fold(1.0, f64::min);
    let d0 = min_ber.log10().floor().min(-1.0);
    let d1 = 0.0;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |ber: f64| TOP + (d1 - ber.log10()) / (d1 - d0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    // decade grid
    let mut d = d0 as i32;
    while d <= d1 as i32 {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
        d += 1;
    }
    let xs: Vec<f64> = {
        let mut v: Vec<f64> = finite().map(|p| p.snr_db).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    for &x in &xs {
        let px = sx(x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"##,
            TOP + ph,
            TOP + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">SNR (dB)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">BER</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.ber > 0.0)
            .map(|p| format!("{:.2},{:.2}", sx(p.snr_db), sy(p.ber)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            for p in &pts {
                let (x, y) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
            }
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 25.0,
            lx + 32.0,
            ly + 4.0,
            escape(c.label())
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mimo_sic::harness::BerPoint;
    use mimo_sic::DetectorKind;

    #[test]
    fn one_polyline_per_curve_and_log_ticks() {
        let curves = vec![
            BerCurve {
                detector: DetectorKind::Sic,
                points: vec![
                    BerPoint::new(0.0, 10, 1000, 100),
                    BerPoint::new(4.0, 10, 1000, 1),
                ],
            },
            BerCurve {
                detector: DetectorKind::Ml,
                points: vec![
                    BerPoint::new(0.0, 10, 1000, 50),
                    BerPoint::new(4.0, 10, 1000, 0),
                ],
            },
        ];
        let svg = render_svg(&curves, "test <run>");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">1e-3<") && svg.contains(">1e0<"));
        assert!(svg.contains("test &lt;run&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
