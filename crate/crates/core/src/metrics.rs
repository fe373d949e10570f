//! Image similarity: mean squared error, SSIM, and cosine similarity of
//! embeddings supplied by an external HTTP provider.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::renderer::{ImageError, RasterImage};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const EMBED_URL_ENV: &str = "SYMDIAG_EMBED_URL";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("malformed embedding response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

fn check_dims(a: &RasterImage, b: &RasterImage) -> Result<(), MetricsError> {
    if a.width() == b.width() && a.height() == b.height() {
        Ok(())
    } else {
        Err(MetricsError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ))
    }
}

/// Mean over every pixel and channel of the squared difference.
pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok((sum / a.data().len() as f64).clamp(0.0, 1.0))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter over the region where the window fits.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k
                .iter()
                .zip(&line[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW)
                .map(|i| k[i] * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cov: f64) -> f64 {
    ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
}

/// Mean structural similarity of the channel-mean luminance, using an 11x11
/// Gaussian window (sigma 1.5) and the standard constants for unit range.
/// Images smaller than the window use global statistics.
pub fn ssim(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    let x = a.luminance();
    let y = b.luminance();

    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
        let vy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
        let cov = x
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - mx) * (q - my))
            .sum::<f64>()
            / n;
        return Ok(ssim_formula(mx, my, vx, vy, cov).clamp(-1.0, 1.0));
    }

    let k = gaussian_kernel();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let exx = filter_valid(&xx, w, h, &k);
    let eyy = filter_valid(&yy, w, h, &k);
    let exy = filter_valid(&xy, w, h, &k);

    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = exx[i] - ux * ux;
            let vy = eyy[i] - uy * uy;
            ssim_formula(ux, uy, vx, vy, exy[i] - ux * uy)
        })
        .sum();
    Ok((total / mx.len() as f64).clamp(-1.0, 1.0))
}

/// Maps a pair of images to a pair of feature vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn embed_pair(
        &self,
        a: &RasterImage,
        b: &RasterImage,
    ) -> Result<(Vec<f64>, Vec<f64>), MetricsError>;
}

#[derive(Debug, Serialize)]
struct EmbedRequest {
    images: [String; 2],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// JSON-over-HTTP provider: POSTs `{"images": [png_b64, png_b64]}` and
/// expects `{"embeddings": [[...], [...]]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpEmbeddingProvider {
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after a transport failure or 5xx response.
    pub retries: u32,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(10),
            retries: 2,
        }
    }

    /// Reads the endpoint from `SYMDIAG_EMBED_URL`; `None` when unset or blank.
    pub fn from_env() -> Option<Self> {
        std::env::var(EMBED_URL_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .map(Self::new)
    }

    fn post(&self, body: &EmbedRequest) -> Result<EmbedResponse, MetricsError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| MetricsError::ProviderUnavailable(e.to_string()))?;
        let mut last = String::new();
        for _ in 0..=self.retries {
            match client.post(&self.endpoint).json(body).send() {
                Ok(resp) if resp.status().is_server_error() => {
                    last = format!("provider returned {}", resp.status());
                }
                Ok(resp) if !resp.status().is_success() => {
                    return Err(MetricsError::ProviderUnavailable(format!(
                        "provider returned {}",
                        resp.status()
                    )));
                }
                Ok(resp) => {
                    let text = resp
                        .text()
                        .map_err(|e| MetricsError::MalformedResponse(e.to_string()))?;
                    return serde_json::from_str(&text)
                        .map_err(|e| MetricsError::MalformedResponse(e.to_string()));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(MetricsError::ProviderUnavailable(last))
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed_pair(
        &self,
        a: &RasterImage,
        b: &RasterImage,
    ) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
        let enc = |img: &RasterImage| -> Result<String, MetricsError> {
            Ok(base64::engine::general_purpose::STANDARD.encode(img.to_png()?))
        };
        let resp = self.post(&EmbedRequest {
            images: [enc(a)?, enc(b)?],
        })?;
        let mut it = resp.embeddings.into_iter();
        match (it.next(), it.next(), it.next()) {
            (Some(u), Some(v), None) => Ok((u, v)),
            _ => Err(MetricsError::MalformedResponse(
                "expected exactly two embeddings".into(),
            )),
        }
    }
}

/// Cosine similarity in [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MetricsError> {
    if u.is_empty() || u.len() != v.len() {
        return Err(MetricsError::MalformedResponse(format!(
            "embedding lengths {} and {} differ or are zero",
            u.len(),
            v.len()
        )));
    }
    if !u.iter().chain(v).all(|x| x.is_finite()) {
        return Err(MetricsError::MalformedResponse(
            "non-finite embedding value".into(),
        ));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricsError::MalformedResponse(
            "zero-norm embedding".into(),
        ));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine similarity of the provider's embeddings of `a` and `b`.
pub fn embedding_similarity(
    a: &RasterImage,
    b: &RasterImage,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let provider = provider
        .ok_or_else(|| MetricsError::ProviderUnavailable("no provider configured".into()))?;
    let (u, v) = provider.embed_pair(a, b)?;
    cosine(&u, &v)
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f32) -> RasterImage {
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                data.extend([f(x, y); 3]);
            }
        }
        RasterImage::from_rgb(w, h, data).unwrap()
    }

    fn noise(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * 3).map(|_| rng.random::<f32>()).collect();
        RasterImage::from_rgb(w, h, data).unwrap()
    }

    #[test]
    fn mse_examples() {
        let white = RasterImage::white(16, 16).unwrap();
        let black = RasterImage::black(16, 16).unwrap();
        let half = img(16, 16, |x, _| if x < 8 { 0.0 } else { 1.0 });
        assert_eq!(mse(&white, &white).unwrap(), 0.0);
        assert_eq!(mse(&black, &white).unwrap(), 1.0);
        assert_eq!(mse(&half, &white).unwrap(), 0.5);
        assert!(matches!(
            mse(&white, &RasterImage::white(8, 16).unwrap()),
            Err(MetricsError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn ssim_constant_images() {
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        for size in [4, 64] {
            let white = RasterImage::white(size, size).unwrap();
            let black = RasterImage::black(size, size).unwrap();
            let s = ssim(&black, &white).unwrap();
            assert!((s - expected).abs() < 1e-12, "{size}: {s}");
            assert!((s - 9.999e-5).abs() < 1e-6);
            assert_eq!(ssim(&white, &white).unwrap(), 1.0);
        }
    }

    #[test]
    fn ssim_matches_direct_window_sum() {
        // Independent oracle: evaluate each window with a 2D kernel directly.
        let a = noise(14, 13, 1);
        let b = noise(14, 13, 2);
        let (x, y) = (a.luminance(), b.luminance());
        let k = gaussian_kernel();
        let mut total = 0.0;
        let mut count = 0.0;
        for oy in 0..=13 - SSIM_WINDOW {
            for ox in 0..=14 - SSIM_WINDOW {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..SSIM_WINDOW {
                    for i in 0..SSIM_WINDOW {
                        let wgt = k[i] * k[j];
                        let idx = (oy + j) * 14 + ox + i;
                        mx += wgt * x[idx];
                        my += wgt * y[idx];
                        sxx += wgt * x[idx] * x[idx];
                        syy += wgt * y[idx] * y[idx];
                        sxy += wgt * x[idx] * y[idx];
                    }
                }
                total += ssim_formula(mx, my, sxx - mx * mx, syy - my * my, sxy - mx * my);
                count += 1.0;
            }
        }
        assert!((ssim(&a, &b).unwrap() - total / count).abs() < 1e-12);
    }

    #[test]
    fn ssim_degrades_with_noise() {
        let base = img(
            48,
            48,
            |x, y| if (x / 8 + y / 8) % 2 == 0 { 0.0 } else { 1.0 },
        );
        let noisy = noise(48, 48, 3);
        let mixed = RasterImage::from_rgb(
            48,
            48,
            base.data()
                .iter()
                .zip(noisy.data())
                .map(|(a, b)| 0.8 * a + 0.2 * b)
                .collect(),
        )
        .unwrap();
        let s1 = ssim(&base, &mixed).unwrap();
        let s2 = ssim(&base, &noisy).unwrap();
        assert!(1.0 > s1 && s1 > s2, "{s1} {s2}");
    }

    struct Fixed(Vec<f64>, Vec<f64>);

    impl EmbeddingProvider for Fixed {
        fn embed_pair(
            &self,
            _: &RasterImage,
            _: &RasterImage,
        ) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
            Ok((self.0.clone(), self.1.clone()))
        }
    }

    #[test]
    fn embedding_similarity_contract() {
        let a = RasterImage::white(4, 4).unwrap();
        let same = Fixed(vec![0.3, -1.2, 2.0], vec![0.3, -1.2, 2.0]);
        assert!((embedding_similarity(&a, &a, Some(&same)).unwrap() - 1.0).abs() < 1e-15);
        let ortho = Fixed(vec![1.0, 0.0], vec![0.0, 5.0]);
        assert_eq!(embedding_similarity(&a, &a, Some(&ortho)).unwrap(), 0.0);
        assert!(matches!(
            embedding_similarity(&a, &a, None),
            Err(MetricsError::ProviderUnavailable(_))
        ));
        let bad = Fixed(vec![1.0], vec![1.0, 2.0]);
        assert!(matches!(
            embedding_similarity(&a, &a, Some(&bad)),
            Err(MetricsError::MalformedResponse(_))
        ));
        let zero = Fixed(vec![0.0, 0.0], vec![1.0, 2.0]);
        assert!(matches!(
            embedding_similarity(&a, &a, Some(&zero)),
            Err(MetricsError::MalformedResponse(_))
        ));
    }

    /// Serves one canned HTTP response per connection and records request bodies.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/embed", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    #[test]
    fn http_provider_round_trip_with_retry() {
        let (url, handle) = serve(vec![
            (503, "{}".into()),
            (200, r#"{"embeddings": [[1.0, 0.0], [1.0, 1.0]]}"#.into()),
        ]);
        let provider = HttpEmbeddingProvider::new(url);
        let a = RasterImage::white(3, 3).unwrap();
        let s = embedding_similarity(&a, &a, Some(&provider)).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let bodies = handle.join().unwrap();
        let req: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        let png = base64::engine::general_purpose::STANDARD
            .decode(req["images"][0].as_str().unwrap())
            .unwrap();
        assert_eq!(RasterImage::from_png(&png).unwrap(), a);
    }

    #[test]
    fn http_provider_errors() {
        let (url, handle) = serve(vec![(200, r#"{"embeddings": [[1.0]]}"#.into())]);
        let a = RasterImage::white(3, 3).unwrap();
        let r = embedding_similarity(&a, &a, Some(&HttpEmbeddingProvider::new(url)));
        assert!(
            matches!(r, Err(MetricsError::MalformedResponse(_))),
            "{r:?}"
        );
        handle.join().unwrap();

        let closed = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            format!("http://{}/", l.local_addr().unwrap())
        };
        let p = HttpEmbeddingProvider {
            retries: 0,
            ..HttpEmbeddingProvider::new(closed)
        };
        assert!(matches!(
            embedding_similarity(&a, &a, Some(&p)),
            Err(MetricsError::ProviderUnavailable(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn self_identity_and_symmetry(seed_a in any::<u64>(), seed_b in any::<u64>(), w in 1usize..24, h in 1usize..24) {
            let a = noise(w, h, seed_a);
            let b = noise(w, h, seed_b);
            prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
            prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
            prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
            prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
            let s = ssim(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }

        #[test]
        fn mse_grows_with_nested_noise(seed in any::<u64>(), t1 in 0.0f32..1.0, dt in 0.0f32..1.0) {
            let base = noise(16, 16, seed);
            let dir = noise(16, 16, seed ^ 0x5555);
            let mask: Vec<bool> = (0..16 * 16 * 3).map(|i| i % 3 != 1).collect();
            let perturb = |t: f32| {
                let data = base.data().iter().zip(dir.data()).zip(&mask)
                    .map(|((b, d), m)| if *m { b + t * (2.0 * d - 1.0) } else { *b })
                    .collect();
                RasterImage::from_rgb(16, 16, data).unwrap()
            };
            let m1 = mse(&base, &perturb(t1)).unwrap();
            let m2 = mse(&base, &perturb(t1 + dt)).unwrap();
            prop_assert!(m2 >= m1);
        }
    }
}
