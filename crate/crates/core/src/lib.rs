pub mod baselines;
pub mod bench;
pub mod dmvf;
pub mod features;
pub mod ffagent;
pub mod mffnet;
pub mod netsim;
pub mod run;
pub mod simkernel;
