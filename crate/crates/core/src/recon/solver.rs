use kiebm_grad::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{CoilStack, ComplexTensor, RealImage};
use crate::ebm::{langevin_sample, Domain, EnergyModel, LangevinConfig};
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::mri::{adjoint_sensitivities, apply_sensitivities, fft2c, ifft2c, sos_combine, SamplingMask};
use crate::mri::{SensitivityMaps, WeightMatrix, WeightParams};
use crate::recon::dc::{dc_image_with_kspace, dc_kspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    IEbm,
    KEbm,
    PkiEbm,
    SkiEbm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::IEbm, Method::KEbm, Method::PkiEbm, Method::SkiEbm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::IEbm => "i-ebm",
            Method::KEbm => "k-ebm",
            Method::PkiEbm => "pki-ebm",
            Method::SkiEbm => "ski-ebm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method {s:?}")))
    }

    pub fn needs_image_model(&self) -> bool {
        *self != Method::KEbm
    }

    pub fn needs_kspace_model(&self) -> bool {
        *self != Method::IEbm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    /// Refine every coil image independently and combine by SOS.
    SosCalibrationFree,
    /// Refine one image and map it through the known sensitivities.
    SensitivityKnown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    pub method: Method,
    pub lambda_i: f64,
    pub lambda_k: f64,
    pub outer_iters: usize,
    /// Image-stage iterations of the sequential solver (`None` = `outer_iters`).
    pub stage2_iters: Option<usize>,
    pub langevin: LangevinConfig,
    pub weight: WeightParams,
    pub calibration: Calibration,
    /// Divisor mapping coil images onto the image model's input range.
    pub intensity_scale: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            method: Method::PkiEbm,
            lambda_i: 0.0,
            lambda_k: 0.0,
            outer_iters: 200,
            stage2_iters: None,
            langevin: LangevinConfig {
                steps: 5,
                anneal: 0.97,
                ..LangevinConfig::default()
            },
            weight: WeightParams::default(),
            calibration: Calibration::SosCalibrationFree,
            intensity_scale: 1.0,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        self.langevin.validate()?;
        if self.outer_iters < 1 {
            return Err(Error::Config("outer_iters must be >= 1".into()));
        }
        for (name, v) in [("lambda_i", self.lambda_i), ("lambda_k", self.lambda_k)] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.intensity_scale > 0.0) {
            return Err(Error::Config("intensity_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Measurements and optional side information for one reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct ReconProblem<'a> {
    /// Measured per-coil k-space `f_c`, zero off the sampled set.
    pub meas: &'a CoilStack,
    pub mask: &'a SamplingMask,
    /// Needed for [`Calibration::SensitivityKnown`].
    pub sens: Option<&'a SensitivityMaps>,
    /// Ground truth for the PSNR trace.
    pub truth: Option<&'a RealImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub image: RealImage,
    /// PSNR after every outer iteration, when ground truth is supplied.
    pub psnr_trace: Vec<f64>,
    pub coil_images: CoilStack,
    /// Final per-coil k-space after data consistency.
    pub coil_kspace: CoilStack,
    /// SOS output of each stage (two entries for the sequential solver).
    pub stage_outputs: Vec<RealImage>,
}

/// Trained priors handed to [`reconstruct`].
#[derive(Debug, Clone, Copy)]
pub struct Priors<'a, T> {
    pub image: Option<&'a EnergyModel<T>>,
    pub kspace: Option<&'a EnergyModel<T>>,
}

struct Ctx<'a, T> {
    p: ReconProblem<'a>,
    cfg: &'a ReconConfig,
    weight: Option<WeightMatrix>,
    /// Per-coil peak of the weighted measurements.
    kscale: Vec<f64>,
    model_i: Option<&'a EnergyModel<T>>,
    model_k: Option<&'a EnergyModel<T>>,
    trace: Vec<f64>,
}

impl<'a, T: Scalar> Ctx<'a, T> {
    fn new(
        p: ReconProblem<'a>,
        cfg: &'a ReconConfig,
        model_i: Option<&'a EnergyModel<T>>,
        model_k: Option<&'a EnergyModel<T>>,
    ) -> Result<Self> {
        cfg.validate()?;
        let (h, w) = (p.meas.height(), p.meas.width());
        p.mask.check_dims(h, w)?;
        if !p.meas.is_finite() {
            return Err(Error::Numerical("measurements contain non-finite values".into()));
        }
        if let Some(m) = model_i {
            m.expect_domain(Domain::Image)?;
        }
        let (weight, kscale) = match model_k {
            Some(m) => {
                m.expect_domain(Domain::WeightedKspace)?;
                let wm = cfg.weight.build(h, w)?;
                let fw = wm.apply(p.meas)?;
                let scales = (0..fw.planes())
                    .map(|c| {
                        let peak = fw.plane(c).iter().map(|z| z.norm()).fold(0.0, f64::max);
                        if peak > 0.0 {
                            peak
                        } else {
                            1.0
                        }
                    })
                    .collect();
                (Some(wm), scales)
            }
            None => (None, Vec::new()),
        };
        if let Some(t) = p.truth {
            t.check_same_dims(&RealImage::zeros(h, w))?;
        }
        if cfg.calibration == Calibration::SensitivityKnown {
            let s = p
                .sens
                .ok_or_else(|| Error::Config("sensitivity-known calibration needs sensitivity maps".into()))?;
            if s.coils() != p.meas.planes() || s.height() != h || s.width() != w {
                return Err(Error::Shape("sensitivity maps do not match the measurements".into()));
            }
        }
        Ok(Self {
            p,
            cfg,
            weight,
            kscale,
            model_i,
            model_k,
            trace: Vec::new(),
        })
    }

    fn record(&mut self, coils: &CoilStack) -> Result<RealImage> {
        let img = sos_combine(coils)?;
        if let Some(t) = self.p.truth {
            self.trace.push(psnr(&img, t, t.max())?);
        }
        Ok(img)
    }

    fn langevin(&self, t: usize) -> LangevinConfig {
        self.cfg.langevin.annealed(t)
    }

    /// Image prior block on per-coil images.
    fn image_prior<R: Rng + ?Sized>(&self, coils: &CoilStack, t: usize, rng: &mut R) -> Result<CoilStack> {
        let model = self.model_i.expect("image model checked");
        let scale = self.cfg.intensity_scale;
        match self.cfg.calibration {
            Calibration::SosCalibrationFree => {
                let x = coils.to_channels::<T>(scale)?;
                let x = langevin_sample(model, &x, &self.langevin(t), rng)?;
                ComplexTensor::from_channels(&x, scale)
            }
            Calibration::SensitivityKnown => {
                let s = self.p.sens.expect("maps checked");
                let img = adjoint_sensitivities(coils, s)?;
                let x = img.to_channels::<T>(scale)?;
                let x = langevin_sample(model, &x, &self.langevin(t), rng)?;
                apply_sensitivities(&ComplexTensor::from_channels(&x, scale)?, s)
            }
        }
    }

    /// Weighted-k-space prior block; each coil is scaled by its own peak.
    fn kspace_prior<R: Rng + ?Sized>(&self, k: &CoilStack, t: usize, rng: &mut R) -> Result<CoilStack> {
        let model = self.model_k.expect("k-space model checked");
        let wm = self.weight.as_ref().expect("weight built with k-space model");
        let kw = wm.apply(k)?;
        let parts = (0..kw.planes())
            .map(|c| kw.plane_tensor(c).to_channels::<T>(self.kscale[c]))
            .collect::<Result<Vec<_>>>()?;
        let x = kiebm_grad::RealTensor::concat_batch(&parts.iter().collect::<Vec<_>>())?;
        let x = langevin_sample(model, &x, &self.langevin(t), rng)?;
        let planes = (0..kw.planes())
            .map(|c| ComplexTensor::from_channels(&x.slice_batch(c, 1)?, self.kscale[c]))
            .collect::<Result<Vec<_>>>()?;
        wm.unapply(&ComplexTensor::from_planes(&planes)?)
    }

    fn check(&self, k: &CoilStack) -> Result<()> {
        if !k.is_finite() {
            return Err(Error::Numerical("reconstruction iterate became non-finite".into()));
        }
        Ok(())
    }

    /// Image-domain loop from the given coil images; returns (images, k-space).
    fn image_loop<R: Rng + ?Sized>(
        &mut self,
        mut images: CoilStack,
        iters: usize,
        rng: &mut R,
    ) -> Result<(CoilStack, CoilStack)> {
        let mut k = fft2c(&images);
        for t in 0..iters {
            let prior = self.image_prior(&images, t, rng)?;
            let (img, kk) = dc_image_with_kspace(&prior, self.p.meas, self.p.mask, self.cfg.lambda_i)?;
            self.check(&kk)?;
            images = img;
            k = kk;
            self.record(&images)?;
        }
        Ok((images, k))
    }

    fn kspace_loop<R: Rng + ?Sized>(&mut self, mut k: CoilStack, iters: usize, rng: &mut R) -> Result<CoilStack> {
        for t in 0..iters {
            let prior = self.kspace_prior(&k, t, rng)?;
            k = dc_kspace(&prior, self.p.meas, self.p.mask, self.cfg.lambda_k)?;
            self.check(&k)?;
            self.record(&ifft2c(&k))?;
        }
        Ok(k)
    }

    fn finish(self, coil_images: CoilStack, coil_kspace: CoilStack, mut stage_outputs: Vec<RealImage>) -> Result<ReconResult> {
        let image = sos_combine(&coil_images)?;
        stage_outputs.push(image.clone());
        Ok(ReconResult {
            image,
            psnr_trace: self.trace,
            coil_images,
            coil_kspace,
            stage_outputs,
        })
    }
}

/// Image-domain prior alternated with image-space data consistency.
pub fn recon_iebm<T: Scalar, R: Rng + ?Sized>(
    p: ReconProblem<'_>,
    model_i: &EnergyModel<T>,
    cfg: &ReconConfig,
    rng: &mut R,
) -> Result<ReconResult> {
    let mut ctx = Ctx::new(p, cfg, Some(model_i), None)?;
    let (img, k) = ctx.image_loop(ifft2c(p.meas), cfg.outer_iters, rng)?;
    ctx.finish(img, k, Vec::new())
}

/// Weighted-k-space prior alternated with k-space data consistency.
pub fn recon_kebm<T: Scalar, R: Rng + ?Sized>(
    p: ReconProblem<'_>,
    model_k: &EnergyModel<T>,
    cfg: &ReconConfig,
    rng: &mut R,
) -> Result<ReconResult> {
    let mut ctx = Ctx::new(p, cfg, None, Some(model_k))?;
    let k = ctx.kspace_loop(p.meas.clone(), cfg.outer_iters, rng)?;
    ctx.finish(ifft2c(&k), k, Vec::new())
}

/// Both priors applied to the same iterate; their k-space outputs are
/// averaged before data consistency.
pub fn recon_pki<T: Scalar, R: Rng + ?Sized>(
    p: ReconProblem<'_>,
    model_k: &EnergyModel<T>,
    model_i: &EnergyModel<T>,
    cfg: &ReconConfig,
    rng: &mut R,
) -> Result<ReconResult> {
    let mut ctx = Ctx::new(p, cfg, Some(model_i), Some(model_k))?;
    let mut k = p.meas.clone();
    for t in 0..cfg.outer_iters {
        let from_image = fft2c(&ctx.image_prior(&ifft2c(&k), t, rng)?);
        let from_kspace = ctx.kspace_prior(&k, t, rng)?;
        let avg = from_image.add(&from_kspace)?.scale(0.5);
        k = dc_kspace(&avg, p.meas, p.mask, cfg.lambda_k)?;
        ctx.check(&k)?;
        ctx.record(&ifft2c(&k))?;
    }
    ctx.finish(ifft2c(&k), k, Vec::new())
}

/// k-space loop followed by an image-domain loop started from its output.
pub fn recon_ski<T: Scalar, R: Rng + ?Sized>(
    p: ReconProblem<'_>,
    model_k: &EnergyModel<T>,
    model_i: &EnergyModel<T>,
    cfg: &ReconConfig,
    rng: &mut R,
) -> Result<ReconResult> {
    let mut ctx = Ctx::new(p, cfg, Some(model_i), Some(model_k))?;
    let k = ctx.kspace_loop(p.meas.clone(), cfg.outer_iters, rng)?;
    let stage1 = ifft2c(&k);
    let first = sos_combine(&stage1)?;
    let iters = cfg.stage2_iters.unwrap_or(cfg.outer_iters);
    let (img, k) = if iters == 0 {
        (stage1, k)
    } else {
        ctx.image_loop(stage1, iters, rng)?
    };
    ctx.finish(img, k, vec![first])
}

fn need<'m, T>(m: Option<&'m EnergyModel<T>>, cfg: &ReconConfig, what: &str) -> Result<&'m EnergyModel<T>> {
    m.ok_or_else(|| Error::Config(format!("{} needs an {what} model", cfg.method.as_str())))
}

/// Dispatches on `cfg.method`.
pub fn reconstruct<T: Scalar, R: Rng + ?Sized>(
    p: ReconProblem<'_>,
    priors: Priors<'_, T>,
    cfg: &ReconConfig,
    rng: &mut R,
) -> Result<ReconResult> {
    match cfg.method {
        Method::IEbm => recon_iebm(p, need(priors.image, cfg, "image")?, cfg, rng),
        Method::KEbm => recon_kebm(p, need(priors.kspace, cfg, "k-space")?, cfg, rng),
        Method::PkiEbm => recon_pki(p, need(priors.kspace, cfg, "k-space")?, need(priors.image, cfg, "image")?, cfg, rng),
        Method::SkiEbm => recon_ski(p, need(priors.kspace, cfg, "k-space")?, need(priors.image, cfg, "image")?, cfg, rng),
    }
}

/// SOS of the zero-filled coil images.
pub fn zero_filled_sos(meas: &CoilStack) -> Result<RealImage> {
    sos_combine(&ifft2c(meas))
}
