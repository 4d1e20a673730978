// deployment helper, not part of the contract source set
const hre = require("hardhat");

async function main() {
  const Pool = await hre.ethers.getContractFactory("Pool");
  await Pool.deploy();
}

main();
