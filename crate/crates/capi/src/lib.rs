#[no_mangle]
pub extern "C" fn spikelab_capi_placeholder() -> u32 { 1 }
