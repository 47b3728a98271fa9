"""Transfer of bimodule maps along strongly Morita equivalent unital inclusions of finite-dimensional C*-algebras."""
