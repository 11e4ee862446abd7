use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Layer widths of the three-stream network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub obs_dim: usize,
    pub num_actions: usize,
    /// Hidden widths of the shared trunk.
    pub trunk: Vec<usize>,
    /// Hidden widths inside each head before its output layer.
    pub head_hidden: Vec<usize>,
    pub activation: Activation,
}

impl NetConfig {
    /// Dense 2x64 trunk, heads with a single output layer.
    pub fn desk(obs_dim: usize, num_actions: usize) -> Self {
        Self {
            obs_dim,
            num_actions,
            trunk: vec![64, 64],
            head_hidden: vec![],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    /// Row-major `outputs x inputs` weights, then `outputs` biases.
    offset: usize,
}

impl Dense {
    fn weights(&self) -> Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> Range<usize> {
        let w_end = self.offset + self.inputs * self.outputs;
        w_end..w_end + self.outputs
    }

    fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }

    fn forward(&self, params: &[f64], x: &[f64], pre: &mut Vec<f64>, out: &mut Vec<f64>) {
        let w = &params[self.weights()];
        let b = &params[self.biases()];
        pre.clear();
        out.clear();
        for o in 0..self.outputs {
            let row = &w[o * self.inputs..(o + 1) * self.inputs];
            let z = b[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
            pre.push(z);
            out.push(self.activation.apply(z));
        }
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `x`.
    fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        pre: &[f64],
        out: &[f64],
        dout: &[f64],
        grads: &mut [f64],
    ) -> Vec<f64> {
        let dz: Vec<f64> = (0..self.outputs)
            .map(|o| dout[o] * self.activation.derivative(pre[o], out[o]))
            .collect();
        let w = &params[self.weights()];
        let mut dx = vec![0.0; self.inputs];
        let (w_range, b_range) = (self.weights(), self.biases());
        let gw = &mut grads[w_range];
        for o in 0..self.outputs {
            if dz[o] == 0.0 {
                continue;
            }
            let row = o * self.inputs..(o + 1) * self.inputs;
            for ((g, wi), (xi, dxi)) in gw[row.clone()]
                .iter_mut()
                .zip(&w[row])
                .zip(x.iter().zip(dx.iter_mut()))
            {
                *g += dz[o] * xi;
                *dxi += dz[o] * wi;
            }
        }
        for (g, d) in grads[b_range].iter_mut().zip(&dz) {
            *g += d;
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Stack {
    layers: Vec<Dense>,
}

/// Pre-activations and outputs of every layer of one stack.
#[derive(Debug, Clone, Default)]
struct StackCache {
    pre: Vec<Vec<f64>>,
    out: Vec<Vec<f64>>,
}

impl Stack {
    fn build(
        widths: &[usize],
        hidden_act: Activation,
        final_act: Activation,
        offset: &mut usize,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == widths.len() {
                    final_act
                } else {
                    hidden_act
                };
                let layer = Dense {
                    inputs: w[0],
                    outputs: w[1],
                    activation: act,
                    offset: *offset,
                };
                *offset += layer.len();
                layer
            })
            .collect();
        Self { layers }
    }

    fn range(&self) -> Range<usize> {
        let start = self.layers.first().map_or(0, |l| l.offset);
        let end = self.layers.last().map_or(0, |l| l.offset + l.len());
        start..end
    }

    fn forward(&self, params: &[f64], x: &[f64], cache: &mut StackCache) {
        cache.pre.resize_with(self.layers.len(), Vec::new);
        cache.out.resize_with(self.layers.len(), Vec::new);
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.out.split_at_mut(i);
            let input = if i == 0 { x } else { &done[i - 1] };
            layer.forward(params, input, &mut cache.pre[i], &mut rest[0]);
        }
    }

    fn output<'a>(&self, x: &'a [f64], cache: &'a StackCache) -> &'a [f64] {
        cache.out.last().map_or(x, |v| v.as_slice())
    }

    fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        cache: &StackCache,
        dout: &[f64],
        grads: &mut [f64],
    ) -> Vec<f64> {
        let mut d = dout.to_vec();
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { x } else { &cache.out[i - 1] };
            d = self.layers[i].backward(params, input, &cache.pre[i], &cache.out[i], &d, grads);
        }
        d
    }
}

/// Q-values from the dueling combination and the raw sigma head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub q: Vec<f64>,
    pub sigma: Vec<f64>,
    pub value: f64,
    pub advantage: Vec<f64>,
}

/// Intermediate values of one forward pass, needed for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    trunk: StackCache,
    value: StackCache,
    advantage: StackCache,
    sigma: StackCache,
}

/// Location of one parameter group in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRange {
    Trunk,
    Value,
    Advantage,
    Sigma,
}

/// Shared dense trunk feeding a value head (1 output), an advantage head and
/// a sigma head (one output per action each). All parameters live in one
/// flat vector so they can be copied, optimized and saved as a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeStreamNet {
    config: NetConfig,
    trunk: Stack,
    value: Stack,
    advantage: Stack,
    sigma: Stack,
    params: Vec<f64>,
}

impl ThreeStreamNet {
    /// Builds the topology with all parameters zero.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        if config.obs_dim == 0 || config.num_actions == 0 {
            return Err(Error::Config(
                "network needs nonzero input and action counts".into(),
            ));
        }
        if config
            .trunk
            .iter()
            .chain(&config.head_hidden)
            .any(|&w| w == 0)
        {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let act = config.activation;
        let mut offset = 0;
        let mut widths = vec![config.obs_dim];
        widths.extend(&config.trunk);
        let trunk = Stack::build(&widths, act, act, &mut offset);
        let feat = *widths.last().unwrap();
        let head = |out: usize, offset: &mut usize| {
            let mut w = vec![feat];
            w.extend(&config.head_hidden);
            w.push(out);
            Stack::build(&w, act, Activation::Identity, offset)
        };
        let value = head(1, &mut offset);
        let advantage = head(config.num_actions, &mut offset);
        let sigma = head(config.num_actions, &mut offset);
        Ok(Self {
            config,
            trunk,
            value,
            advantage,
            sigma,
            params: vec![0.0; offset],
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers: Vec<Dense> = net.all_layers().cloned().collect();
        for layer in layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut net.params[layer.weights()] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    fn all_layers(&self) -> impl Iterator<Item = &Dense> {
        self.trunk
            .layers
            .iter()
            .chain(&self.value.layers)
            .chain(&self.advantage.layers)
            .chain(&self.sigma.layers)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn num_actions(&self) -> usize {
        self.config.num_actions
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameter"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn param_range(&self, group: ParamRange) -> Range<usize> {
        match group {
            ParamRange::Trunk => self.trunk.range(),
            ParamRange::Value => self.value.range(),
            ParamRange::Advantage => self.advantage.range(),
            ParamRange::Sigma => self.sigma.range(),
        }
    }

    /// Zeroes the output layer of every head, making q and sigma identically 0.
    pub fn zero_head_outputs(&mut self) {
        let ranges: Vec<Range<usize>> = [&self.value, &self.advantage, &self.sigma]
            .iter()
            .filter_map(|s| s.layers.last())
            .map(|l| l.offset..l.offset + l.len())
            .collect();
        for r in ranges {
            self.params[r].fill(0.0);
        }
    }

    pub fn forward(&self, obs: &[f64]) -> Result<NetOutput> {
        self.forward_cached(obs).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, obs: &[f64]) -> Result<(NetOutput, ForwardCache)> {
        if obs.len() != self.config.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.obs_dim,
                got: obs.len(),
            });
        }
        let mut cache = ForwardCache {
            input: obs.to_vec(),
            trunk: StackCache::default(),
            value: StackCache::default(),
            advantage: StackCache::default(),
            sigma: StackCache::default(),
        };
        self.trunk.forward(&self.params, obs, &mut cache.trunk);
        let feat = self.trunk.output(obs, &cache.trunk).to_vec();
        self.value.forward(&self.params, &feat, &mut cache.value);
        self.advantage
            .forward(&self.params, &feat, &mut cache.advantage);
        self.sigma.forward(&self.params, &feat, &mut cache.sigma);

        let value = self.value.output(&feat, &cache.value)[0];
        let advantage = self.advantage.output(&feat, &cache.advantage).to_vec();
        let mean_adv = advantage.iter().sum::<f64>() / advantage.len() as f64;
        let q = advantage.iter().map(|a| value + a - mean_adv).collect();
        let sigma = self.sigma.output(&feat, &cache.sigma).to_vec();
        Ok((
            NetOutput {
                q,
                sigma,
                value,
                advantage,
            },
            cache,
        ))
    }

    /// Adds the parameter gradient for output gradients `dq` and `dsigma`
    /// (one entry per action) into `grads`. The sigma gradient reaches only
    /// the sigma head and the trunk; value and advantage heads see `dq` alone.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dq: &[f64],
        dsigma: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        let na = self.config.num_actions;
        if dq.len() != na {
            return Err(Error::DimensionMismatch {
                expected: na,
                got: dq.len(),
            });
        }
        if dsigma.len() != na {
            return Err(Error::DimensionMismatch {
                expected: na,
                got: dsigma.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let feat = self.trunk.output(&cache.input, &cache.trunk);
        let dq_sum: f64 = dq.iter().sum();
        let dq_mean = dq_sum / na as f64;
        let dadv: Vec<f64> = dq.iter().map(|d| d - dq_mean).collect();

        let mut dfeat = self
            .value
            .backward(&self.params, feat, &cache.value, &[dq_sum], grads);
        let da = self
            .advantage
            .backward(&self.params, feat, &cache.advantage, &dadv, grads);
        let ds = self
            .sigma
            .backward(&self.params, feat, &cache.sigma, dsigma, grads);
        for ((f, a), s) in dfeat.iter_mut().zip(&da).zip(&ds) {
            *f += a + s;
        }
        self.trunk
            .backward(&self.params, &cache.input, &cache.trunk, &dfeat, grads);
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct NetHeader {
    kind: String,
    config: NetConfig,
}

const NET_KIND: &str = "varexplore-net";

impl ThreeStreamNet {
    /// Writes the layer configuration as a JSON header followed by the
    /// parameters as little-endian f64.
    pub fn save<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let header = NetHeader {
            kind: NET_KIND.into(),
            config: self.config.clone(),
        };
        super::write_arrays(w, &header, &[&self.params])
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self> {
        let (header, arrays): (NetHeader, _) = super::read_arrays(r)?;
        if header.kind != NET_KIND {
            return Err(Error::Format(format!(
                "not a network file: {:?}",
                header.kind
            )));
        }
        let [params]: [Vec<f64>; 1] = arrays
            .try_into()
            .map_err(|_| Error::Format("network file must hold one array".into()))?;
        let mut net = Self::zeros(header.config)?;
        net.set_params(&params)?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_is_bit_exact() {
        let net = toy(11);
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        let back = ThreeStreamNet::load(buf.as_slice()).unwrap();
        assert_eq!(back.config(), net.config());
        let bits = |n: &ThreeStreamNet| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&net));
        assert!(ThreeStreamNet::load(&buf[..buf.len() - 3]).is_err());
    }

    fn toy(seed: u64) -> ThreeStreamNet {
        ThreeStreamNet::new(
            NetConfig {
                obs_dim: 3,
                num_actions: 2,
                trunk: vec![5, 4],
                head_hidden: vec![3],
                activation: Activation::Tanh,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn dueling_arithmetic() {
        // trunk-less net with identity heads: V = 1, A = [1, 3]
        let mut net = ThreeStreamNet::zeros(NetConfig {
            obs_dim: 1,
            num_actions: 2,
            trunk: vec![],
            head_hidden: vec![],
            activation: Activation::Identity,
        })
        .unwrap();
        let v = net.param_range(ParamRange::Value);
        let a = net.param_range(ParamRange::Advantage);
        net.params_mut()[v.start + 1] = 1.0; // value bias
        net.params_mut()[a.start + 2] = 1.0; // advantage biases
        net.params_mut()[a.start + 3] = 3.0;
        let out = net.forward(&[0.0]).unwrap();
        assert_eq!(out.q, vec![0.0, 2.0]);
        assert_eq!(out.value, 1.0);
    }

    #[test]
    fn zero_heads_give_zero_outputs() {
        let mut net = toy(1);
        net.zero_head_outputs();
        let out = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(out.q, vec![0.0, 0.0]);
        assert_eq!(out.sigma, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = toy(2);
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 1
            })
        ));
        let (_, cache) = net.forward_cached(&[0.0; 3]).unwrap();
        let mut g = vec![0.0; net.num_params()];
        assert!(net.backward(&cache, &[1.0], &[0.0, 0.0], &mut g).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradient() {
        let net = toy(3);
        let (_, cache) = net.forward_cached(&[0.5, 0.1, -0.4]).unwrap();
        let mut g = vec![0.0; net.num_params()];
        net.backward(&cache, &[0.0, 0.0], &[0.0, 0.0], &mut g)
            .unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn param_groups_tile_the_vector() {
        let net = toy(4);
        let groups = [
            ParamRange::Trunk,
            ParamRange::Value,
            ParamRange::Advantage,
            ParamRange::Sigma,
        ];
        let mut end = 0;
        for g in groups {
            let r = net.param_range(g);
            assert_eq!(r.start, end);
            end = r.end;
        }
        assert_eq!(end, net.num_params());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        assert_eq!(toy(5), toy(5));
        assert_ne!(toy(5).params(), toy(6).params());
    }
}
